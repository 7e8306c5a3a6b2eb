"""
Labeled CTR samples: a held-out positive per history prefix plus uniformly drawn
negatives that share the positive's history.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd

from apps.augmentation.sequences import BehaviorSequence
from main.utils.exceptions import ConfigurationError

from .interchange import InteractionRecord, n_items_of, records

logger = logging.getLogger(__name__)

SampleMode = Literal["last_item", "all_positions"]


@dataclass(frozen=True)
class TrainingSample:
    user_id: int
    item_id: int
    label: int
    history: BehaviorSequence

    @property
    def split(self) -> Optional[str]:
        return self.history.split


@dataclass(frozen=True)
class SampleSet:
    samples: Tuple[TrainingSample, ...]
    skipped_users: int

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([sample.label for sample in self.samples], dtype=np.int64)


def user_sequences(frame: pd.DataFrame) -> Dict[int, BehaviorSequence]:
    """Full time-ordered sequence of every user in `frame`, ordered by user ID."""
    grouped: Dict[int, List[InteractionRecord]] = {}
    for record in records(frame.sort_values(["user_id", "timestamp"], kind="stable")):
        grouped.setdefault(record.user_id, []).append(record)
    return {
        user_id: BehaviorSequence.of(
            user_id,
            [record.item_id for record in rows],
            [record.timestamp for record in rows],
            rows[0].split,
        )
        for user_id, rows in sorted(grouped.items())
    }


def build_histories(frame: pd.DataFrame) -> Dict[int, BehaviorSequence]:
    """Every user's sequence without its final interaction, which is held out as a target."""
    histories = {}
    for user_id, sequence in user_sequences(frame).items():
        timestamps = sequence.timestamps[:-1] if sequence.timestamps else None
        histories[user_id] = BehaviorSequence(
            user_id, sequence.items[:-1], timestamps, sequence.split
        )
    return histories


def _prefix(sequence: BehaviorSequence, stop: int) -> BehaviorSequence:
    timestamps = sequence.timestamps[:stop] if sequence.timestamps else None
    return BehaviorSequence(sequence.user_id, sequence.items[:stop], timestamps, sequence.split)


def _negatives(positive: int, count: int, n_items: int, rng: np.random.Generator) -> List[int]:
    drawn = []
    while len(drawn) < count:
        candidate = int(rng.integers(1, n_items + 1))
        if candidate != positive:
            drawn.append(candidate)
    return drawn


def make_samples(
    frame: pd.DataFrame,
    mode: SampleMode = "last_item",
    negatives_per_positive: int = 1,
    seed: int = 0,
    n_items: Optional[int] = None,
) -> SampleSet:
    """
    `last_item` holds out each user's final interaction; `all_positions` turns every
    interaction after the first into a target. Occurrences of the target are removed
    from its history; users whose history ends up empty are skipped and counted.
    """
    if mode not in ("last_item", "all_positions"):
        raise ConfigurationError(f"unknown sample mode '{mode}'")
    if negatives_per_positive < 0:
        raise ConfigurationError("negatives_per_positive must be non-negative")
    n_items = n_items_of(frame) if n_items is None else n_items
    if n_items < 2:
        raise ConfigurationError("negative sampling needs at least two items")

    rng = np.random.default_rng(seed)
    samples: List[TrainingSample] = []
    skipped = 0
    for user_id, sequence in user_sequences(frame).items():
        stops = [sequence.length - 1] if mode == "last_item" else range(1, sequence.length)
        produced = 0
        for stop in stops:
            if stop < 1:
                continue
            positive = sequence.items[stop]
            history = _prefix(sequence, stop).without(positive)
            if history.length == 0:
                continue
            samples.append(TrainingSample(user_id, positive, 1, history))
            for negative in _negatives(positive, negatives_per_positive, n_items, rng):
                samples.append(TrainingSample(user_id, negative, 0, history))
            produced += 1
        if produced == 0:
            skipped += 1
    if skipped:
        logger.info(f"Skipped {skipped} users without a usable history")
    return SampleSet(tuple(samples), skipped)
