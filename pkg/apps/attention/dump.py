import logging
from pathlib import Path

import numpy as np
import pandas as pd

from apps.augmentation.augment import AugmentedSequence
from main.utils.exceptions import DimensionError

logger = logging.getLogger(__name__)

COLUMNS = ["position_id", "user_slot", "user_id", "item_id", "masked", "weight"]


def attention_frame(aug: AugmentedSequence, weights: np.ndarray) -> pd.DataFrame:
    """One row per layout position of `aug`, oldest slot first."""
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.shape[0] != aug.total_length:
        raise DimensionError(
            f"{weights.shape[0]} weights for an augmented sequence of length {aug.total_length}"
        )
    user_ids = [aug.user_ids[k] for k in aug.source_slot]
    return pd.DataFrame(
        {
            "position_id": aug.position_ids.astype(np.int64),
            "user_slot": aug.source_slot.astype(np.int64),
            "user_id": pd.array(user_ids, dtype="Int64"),
            "item_id": aug.items.astype(np.int64),
            "masked": (~aug.mask).astype(np.int64),
            "weight": weights,
        },
        columns=COLUMNS,
    )


def write_attention_weights(path: Path, aug: AugmentedSequence, weights: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    attention_frame(aug, weights).to_csv(path, index=False, float_format="%.9f")
    logger.info(f"Wrote attention weights for user {aug.target_user} to {path}")
    return path
