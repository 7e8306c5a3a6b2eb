"""
Mini-batch Adam training with validation-AUC early stopping.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from apps.tensor import Adam
from main.utils.exceptions import TrainingDivergenceError

from .batching import ModelInputs
from .config import ModelConfig, TrainingConfig
from .losses import bce_loss
from .metrics import auc, logloss
from .model import ModelParams, forward, predict

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "train_loss", "val_auc", "val_logloss", "wall_time"]


@dataclass
class EarlyStopping:
    """Stop once the score has failed to improve `patience` epochs in a row."""

    patience: int = 1
    best_score: float = float("-inf")
    best_epoch: Optional[int] = None
    best_state: object = None
    bad_epochs: int = 0

    def update(self, epoch: int, score: float, state=None) -> bool:
        if score > self.best_score:
            self.best_score, self.best_epoch, self.best_state = score, epoch, state
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_auc: float
    val_logloss: float
    wall_time: float


@dataclass
class TrainingResult:
    params: ModelParams
    log: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False

    def log_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.log], columns=LOG_COLUMNS)

    def write_log(self, path: Path, include_time: bool = True) -> Path:
        """CSV per epoch; `include_time=False` drops the only non-deterministic column."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = self.log_frame()
        if not include_time:
            frame = frame.drop(columns=["wall_time"])
        frame.to_csv(path, index=False, float_format="%.6f")
        return path


def train(
    train_inputs: ModelInputs,
    val_inputs: ModelInputs,
    model_config: ModelConfig,
    training_config: TrainingConfig,
    n_items: int,
    d_prime: int,
    seed: int = 0,
    verbose: bool = False,
    initial: Optional[ModelParams] = None,
) -> TrainingResult:
    """Returns the parameters of the best validation-AUC epoch (epochs count from 1)."""
    params = initial or ModelParams.initialize(n_items, d_prime, model_config, seed=seed)
    rng = np.random.default_rng(seed)
    optimizer = Adam(training_config.lr)
    stopper = EarlyStopping(training_config.patience)
    result = TrainingResult(params)
    logger.info(
        f"Training {params.plan.variant} / {params.plan.pooling} (K={params.plan.top_k}) on "
        f"{len(train_inputs)} samples, {params.num_values()} parameters"
    )

    for epoch in range(1, training_config.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_inputs))
        losses, sizes = [], []
        batches = range(0, len(order), training_config.batch_size)
        for batch, start in enumerate(tqdm(batches, desc=f"epoch {epoch}", disable=not verbose)):
            rows = order[start : start + training_config.batch_size]
            inputs = train_inputs.take(rows)
            loss = bce_loss(forward(inputs, params, training=True, rng=rng), inputs.labels)
            if not np.isfinite(loss.item()):
                raise TrainingDivergenceError(
                    f"loss diverged at epoch {epoch}, batch {batch}", epoch=epoch, batch=batch
                )
            loss.backward()
            params = optimizer.step(params)
            losses.append(loss.item())
            sizes.append(len(rows))

        scores = predict(val_inputs, params)
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.average(losses, weights=sizes)),
            val_auc=auc(scores, val_inputs.labels),
            val_logloss=logloss(scores, val_inputs.labels),
            wall_time=time.perf_counter() - started,
        )
        result.log.append(record)
        logger.info(
            f"Epoch {epoch}: train loss {record.train_loss:.6f}, val AUC {record.val_auc:.6f}, "
            f"val logloss {record.val_logloss:.6f}"
        )
        stopper.update(epoch, record.val_auc, params)
        if stopper.should_stop:
            result.stopped_early = epoch < training_config.max_epochs
            logger.info(f"Early stopping after epoch {epoch}; best epoch {stopper.best_epoch}")
            break

    result.params = stopper.best_state
    result.best_epoch = stopper.best_epoch
    return result
