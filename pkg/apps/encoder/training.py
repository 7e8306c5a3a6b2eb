"""
Next-item pretraining for the sequence encoder: BCE with one uniformly sampled
negative per positive, fixed epoch budget, no early stopping.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from apps.augmentation.sequences import PAD_ITEM, BehaviorSequence
from apps.tensor import Adam, Tensor
from apps.tensor import ops
from apps.tensor.losses import binary_cross_entropy
from main.utils.exceptions import ConfigurationError, LeakageError, TrainingDivergenceError

from .config import EncoderConfig
from .sasrec import EncoderParams, hidden_states

logger = logging.getLogger(__name__)


def sample_negatives(
    targets: np.ndarray, n_items: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform item IDs in [1, n_items] different from `targets` (pads map to pads)."""
    if n_items < 2:
        raise ConfigurationError("negative sampling needs at least two items")
    negatives = rng.integers(1, n_items + 1, size=targets.shape)
    clash = negatives == targets
    while np.any(clash):
        negatives[clash] = rng.integers(1, n_items + 1, size=int(clash.sum()))
        clash = negatives == targets
    return np.where(targets == PAD_ITEM, PAD_ITEM, negatives)


def _training_windows(
    corpus: Sequence[BehaviorSequence], max_len: int
) -> Tuple[np.ndarray, np.ndarray]:
    inputs, targets = [], []
    for sequence in corpus:
        if sequence.length < 2:
            continue
        window, _ = sequence.window(max_len + 1)
        inputs.append(window[:-1])
        targets.append(window[1:])
    if not inputs:
        raise ConfigurationError("pretraining corpus has no user with two or more behaviors")
    return np.stack(inputs), np.stack(targets)


def _batch_loss(
    params: EncoderParams, inputs: np.ndarray, targets: np.ndarray, negatives: np.ndarray
) -> Tensor:
    hidden = hidden_states(inputs, params)
    table = params["item_embedding"]
    positive = ops.reduce_sum(ops.mul(hidden, ops.gather_rows(table, targets)), axis=-1)
    negative = ops.reduce_sum(ops.mul(hidden, ops.gather_rows(table, negatives)), axis=-1)
    probs = ops.sigmoid(ops.concat([positive, negative], axis=1))
    valid = ((inputs != PAD_ITEM) & (targets != PAD_ITEM)).astype(np.float64)
    labels = np.concatenate([np.ones(targets.shape), np.zeros(targets.shape)], axis=1)
    return binary_cross_entropy(probs, labels, weights=np.concatenate([valid, valid], axis=1))


def pretrain_encoder(
    corpus: Sequence[BehaviorSequence],
    n_items: int,
    config: EncoderConfig,
    seed: int = 0,
    verbose: bool = False,
) -> Tuple[EncoderParams, List[float]]:
    """Train on train-split histories; returns frozen params and the mean loss per epoch."""
    if not corpus:
        raise ConfigurationError("pretraining corpus is empty")
    leaked = sorted({s.user_id for s in corpus if s.split not in (None, "train")})
    if leaked:
        raise LeakageError(f"pretraining corpus contains non-train users: {leaked[:10]}")

    inputs, targets = _training_windows(corpus, config.max_len)
    rng = np.random.default_rng(seed)
    params = EncoderParams.initialize(
        n_items,
        d_prime=config.d_prime,
        max_len=config.max_len,
        n_blocks=config.blocks,
        n_heads=config.heads,
        seed=seed,
        init_std=config.init_std,
    )
    optimizer = Adam(config.lr)
    logger.info(
        f"Pretraining encoder on {len(inputs)} sequences, d'={config.d_prime}, "
        f"{config.epochs} epochs"
    )

    epoch_losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(inputs))
        losses, weights = [], []
        batches = range(0, len(order), config.batch_size)
        for batch, start in enumerate(tqdm(batches, desc=f"encoder epoch {epoch}", disable=not verbose)):
            rows = order[start : start + config.batch_size]
            negatives = sample_negatives(targets[rows], n_items, rng)
            loss = _batch_loss(params, inputs[rows], targets[rows], negatives)
            if not np.isfinite(loss.item()):
                raise TrainingDivergenceError(
                    f"encoder loss diverged at epoch {epoch}, batch {batch}",
                    epoch=epoch,
                    batch=batch,
                )
            loss.backward()
            params = optimizer.step(params)
            losses.append(loss.item())
            weights.append(len(rows))
        epoch_loss = float(np.average(losses, weights=weights))
        epoch_losses.append(epoch_loss)
        logger.info(f"Encoder epoch {epoch}: loss {epoch_loss:.6f}")

    return params.freeze(), epoch_losses
