"""
Synthetic implicit-feedback corpus with planted user-similarity structure.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List

import numpy as np
import pandas as pd

from main.utils.exceptions import ConfigurationError

from .config import SyntheticConfig
from .interchange import INTERACTION_COLUMNS

logger = logging.getLogger(__name__)

SHARD_SIZE = 256


@dataclass(frozen=True)
class SyntheticCorpus:
    """Interactions plus the ground-truth cluster of every user (index = user ID) and item (index = item ID - 1)."""

    interactions: pd.DataFrame
    user_clusters: np.ndarray
    item_clusters: np.ndarray


def _cluster_centers(config: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    if config.n_clusters <= config.latent_dim:
        basis, _ = np.linalg.qr(rng.normal(size=(config.latent_dim, config.n_clusters)))
        centers = basis.T
    else:
        centers = rng.normal(size=(config.n_clusters, config.latent_dim))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    return centers * config.cluster_scale


def _length_distribution(config: SyntheticConfig) -> np.ndarray:
    lengths = np.arange(config.min_length, config.max_length + 1, dtype=np.float64)
    weights = lengths ** (-config.length_exponent)
    return weights / weights.sum()


def _sample_shard(
    user_ids: np.ndarray,
    user_latent: np.ndarray,
    item_latent: np.ndarray,
    config: SyntheticConfig,
    seed: np.random.SeedSequence,
) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    lengths = config.min_length + rng.choice(
        config.max_length - config.min_length + 1,
        size=len(user_ids),
        p=_length_distribution(config),
    )
    frames: List[pd.DataFrame] = []
    for user_id, latent, length in zip(user_ids, user_latent, lengths):
        logits = item_latent @ latent / config.temperature
        # Gumbel top-k: a draw without replacement from softmax(logits), in draw order.
        keys = logits + rng.gumbel(size=logits.shape)
        items = np.argsort(-keys, kind="stable")[:length] + 1
        timestamps = rng.integers(0, 86_400) + np.cumsum(rng.integers(1, 3_600, size=length))
        frames.append(
            pd.DataFrame({"user_id": user_id, "item_id": items, "timestamp": timestamps})
        )
    return pd.concat(frames, ignore_index=True)


def generate_synthetic(config: SyntheticConfig, threads: int = 1) -> SyntheticCorpus:
    """
    Deterministic in `config.seed`; users are generated in fixed-size shards with
    spawned seeds, so the corpus does not depend on `threads`.
    """
    if config.n_items < config.n_clusters:
        raise ConfigurationError(
            f"{config.n_items} items cannot cover {config.n_clusters} clusters"
        )
    if config.max_length > config.n_items:
        raise ConfigurationError(
            f"max_length {config.max_length} exceeds the item count {config.n_items}"
        )

    root = np.random.SeedSequence(config.seed)
    latent_seed, *shard_seeds = root.spawn(1 + -(-config.n_users // SHARD_SIZE))
    rng = np.random.default_rng(latent_seed)
    centers = _cluster_centers(config, rng)
    user_clusters = rng.permutation(np.arange(config.n_users) % config.n_clusters)
    item_clusters = rng.permutation(np.arange(config.n_items) % config.n_clusters)
    user_latent = centers[user_clusters] + rng.normal(
        0.0, config.user_spread, (config.n_users, config.latent_dim)
    )
    item_latent = centers[item_clusters] + rng.normal(
        0.0, config.item_spread, (config.n_items, config.latent_dim)
    )

    shards = [
        slice(start, min(start + SHARD_SIZE, config.n_users))
        for start in range(0, config.n_users, SHARD_SIZE)
    ]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        frames = list(
            executor.map(
                lambda job: _sample_shard(
                    np.arange(config.n_users)[job[0]],
                    user_latent[job[0]],
                    item_latent,
                    config,
                    job[1],
                ),
                zip(shards, shard_seeds),
            )
        )
    interactions = (
        pd.concat(frames, ignore_index=True)[list(INTERACTION_COLUMNS)]
        .astype("int64")
        .sort_values(["user_id", "timestamp"], kind="stable")
        .reset_index(drop=True)
    )
    logger.info(
        f"Generated {len(interactions)} interactions for {config.n_users} users over "
        f"{config.n_items} items in {config.n_clusters} clusters"
    )
    return SyntheticCorpus(interactions, user_clusters, item_clusters)
