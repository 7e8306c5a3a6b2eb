"""
Interaction interchange format: UTF-8 CSV with header `user_id,item_id,timestamp`,
sorted by (user_id, timestamp). Item IDs start at 1; 0 is the pad item.
"""

import logging
from pathlib import Path
from typing import NamedTuple, Optional

import pandas as pd

from apps.augmentation.sequences import PAD_ITEM
from main.utils.exceptions import ConfigurationError, MissingArtifactError

logger = logging.getLogger(__name__)

INTERACTION_COLUMNS = ("user_id", "item_id", "timestamp")
SPLIT_COLUMN = "split"


class InteractionRecord(NamedTuple):
    user_id: int
    item_id: int
    timestamp: int
    split: Optional[str] = None


def validate_interactions(frame: pd.DataFrame) -> pd.DataFrame:
    """Checked, integer-typed copy sorted by (user_id, timestamp)."""
    missing = [column for column in INTERACTION_COLUMNS if column not in frame.columns]
    if missing:
        raise ConfigurationError(f"interaction table is missing columns {missing}")
    if frame.empty:
        raise ConfigurationError("interaction table is empty")
    columns = list(INTERACTION_COLUMNS) + ([SPLIT_COLUMN] if SPLIT_COLUMN in frame else [])
    frame = frame[columns].copy()
    for column in INTERACTION_COLUMNS:
        if not pd.api.types.is_integer_dtype(frame[column]):
            raise ConfigurationError(f"column '{column}' must hold integers")
        frame[column] = frame[column].astype("int64")
    if (frame["user_id"] < 0).any():
        raise ConfigurationError("user IDs must be non-negative")
    if (frame["item_id"] <= PAD_ITEM).any():
        raise ConfigurationError(f"item IDs must be above the pad ID {PAD_ITEM}")
    frame = frame.sort_values(["user_id", "timestamp"], kind="stable").reset_index(drop=True)
    steps = frame.groupby("user_id")["timestamp"].diff()
    if (steps <= 0).any():
        user = int(frame.loc[steps[steps <= 0].index[0], "user_id"])
        raise ConfigurationError(f"timestamps of user {user} are not strictly increasing")
    return frame


def n_items_of(frame: pd.DataFrame) -> int:
    return int(frame["item_id"].max())


def write_interactions(path: Path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    validate_interactions(frame).to_csv(path, index=False, encoding="utf-8")
    logger.info(f"Wrote {len(frame)} interactions to {path}")
    return path


def read_interactions(path: Path, command: str = "generate") -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"interaction file {path} does not exist", command=command)
    return validate_interactions(pd.read_csv(path, encoding="utf-8"))


def records(frame: pd.DataFrame):
    """Iterate the table as InteractionRecord tuples."""
    has_split = SPLIT_COLUMN in frame
    for row in frame.itertuples(index=False):
        yield InteractionRecord(
            int(row.user_id),
            int(row.item_id),
            int(row.timestamp),
            getattr(row, SPLIT_COLUMN) if has_split else None,
        )
