import logging
import math
from typing import Dict, Sequence

import numpy as np
import pandas as pd

from main.utils.exceptions import ConfigurationError

from .interchange import SPLIT_COLUMN

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


def split_sizes(n_users: int, ratios: Sequence[float]) -> Dict[str, int]:
    """Validation and test get floor(n * ratio) users, at least one each; train the rest."""
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigurationError(f"split ratios must be three non-negative numbers, got {ratios}")
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-6):
        raise ConfigurationError(f"split ratios must sum to 1, got {sum(ratios)}")
    if n_users < 3:
        raise ConfigurationError(f"splitting needs at least 3 users, got {n_users}")
    val = max(1, math.floor(n_users * ratios[1] + 1e-9))
    test = max(1, math.floor(n_users * ratios[2] + 1e-9))
    train = n_users - val - test
    if train < 1:
        raise ConfigurationError(f"ratios {ratios} leave no training users out of {n_users}")
    return {"train": train, "val": val, "test": test}


def split_by_user(
    frame: pd.DataFrame, ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0
) -> pd.DataFrame:
    """Copy of `frame` with a `split` column; every user lands in exactly one split."""
    users = np.unique(frame["user_id"].to_numpy())
    sizes = split_sizes(len(users), ratios)
    shuffled = np.random.default_rng(seed).permutation(users)
    tags = np.repeat(np.array(SPLITS), [sizes[name] for name in SPLITS])
    assignment = dict(zip(shuffled.tolist(), tags.tolist()))
    tagged = frame.copy()
    tagged[SPLIT_COLUMN] = tagged["user_id"].map(assignment)
    logger.info(f"Split {len(users)} users into {sizes}")
    return tagged


def users_by_split(frame: pd.DataFrame) -> Dict[str, np.ndarray]:
    if SPLIT_COLUMN not in frame:
        raise ConfigurationError("interactions have not been split")
    grouped = frame.groupby(SPLIT_COLUMN)["user_id"].unique()
    return {name: np.sort(grouped.get(name, np.array([], dtype=np.int64))) for name in SPLITS}
