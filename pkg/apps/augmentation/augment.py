"""
Augmented behavior sequences: the K most similar users' windows followed by the
target user's window, each truncated / left-padded to L independently.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Optional, Tuple

import numpy as np

from main.utils.exceptions import ConfigurationError, InternalConsistencyError

from .positions import check_scheme, position_ids
from .sequences import PAD_ITEM, BehaviorSequence

if TYPE_CHECKING:
    from apps.retrieval.pool import SimilarUserResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AugmentedSequence:
    """
    # AugmentedSequence
    Slot-major layout of K+1 user slots of width L, ordered [k=K, ..., k=1, k=0]
    (most similar neighbor next to the target, target last).

    - items / position_ids / source_slot / mask: arrays of length (K+1)*L
    - user_ids[k]: the user behind slot k (None for a missing neighbor)
    - scores[k]: retrieval score of neighbor k (nan for the target and missing neighbors)
    - lengths[k]: non-pad count of slot k
    """

    top_k: int
    max_length: int
    items: np.ndarray
    position_ids: np.ndarray
    source_slot: np.ndarray
    mask: np.ndarray
    user_ids: Tuple[Optional[int], ...]
    scores: Tuple[float, ...]
    lengths: Tuple[int, ...]
    scheme: str = "UTPE"

    @property
    def total_length(self) -> int:
        return (self.top_k + 1) * self.max_length

    @property
    def target_user(self) -> int:
        return self.user_ids[0]

    def slot(self, k: int) -> slice:
        """Positions of user slot k in the layout."""
        start = (self.top_k - k) * self.max_length
        return slice(start, start + self.max_length)


def build_augmented(
    target: BehaviorSequence,
    neighbors: "SimilarUserResult",
    sequences: Mapping[int, BehaviorSequence],
    max_length: int,
    top_k: int,
    scheme: str = "UTPE",
) -> AugmentedSequence:
    if max_length <= 0:
        raise ConfigurationError(f"L must be positive, got {max_length}")
    if top_k < 0:
        raise ConfigurationError(f"K must be non-negative, got {top_k}")
    check_scheme(scheme)

    entries = neighbors.entries[:top_k]
    slot_sequences = [target]
    for entry in entries:
        sequence = sequences.get(entry.user_id)
        if sequence is None:
            raise InternalConsistencyError(f"no behavior sequence for neighbor {entry.user_id}")
        slot_sequences.append(sequence)

    windows, lengths = [], []
    for k in range(top_k + 1):
        if k < len(slot_sequences):
            window, length = slot_sequences[k].window(max_length)
        else:
            window, length = np.full(max_length, PAD_ITEM, dtype=np.int64), 0
        windows.append(window)
        lengths.append(length)

    items = np.concatenate(windows[::-1])
    user_ids = (target.user_id,) + tuple(e.user_id for e in entries) + (None,) * (
        top_k - len(entries)
    )
    scores = (float("nan"),) + tuple(e.score for e in entries) + (float("nan"),) * (
        top_k - len(entries)
    )
    return AugmentedSequence(
        top_k=top_k,
        max_length=max_length,
        items=items,
        position_ids=position_ids(lengths, max_length, scheme),
        source_slot=np.repeat(np.arange(top_k, -1, -1), max_length),
        mask=items != PAD_ITEM,
        user_ids=user_ids,
        scores=scores,
        lengths=tuple(lengths),
        scheme=scheme,
    )


def assign_position_ids(aug: AugmentedSequence, scheme: str) -> AugmentedSequence:
    check_scheme(scheme)
    return dataclasses.replace(
        aug, position_ids=position_ids(aug.lengths, aug.max_length, scheme), scheme=scheme
    )


def augmentation_ratio(aug: AugmentedSequence) -> float:
    """Augmented non-pad length over the target's own non-pad length."""
    own = aug.lengths[0]
    if own == 0:
        return float("nan")
    return float(sum(aug.lengths)) / own
