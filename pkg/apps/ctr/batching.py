"""
Turn labeled samples into the fixed-shape arrays the model consumes.
"""

import logging
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence

import numpy as np

from apps.augmentation.augment import AugmentedSequence, augmentation_ratio, build_augmented
from apps.augmentation.sequences import BehaviorSequence
from apps.dataset.samples import TrainingSample
from apps.retrieval.pool import SimilarUserResult
from main.utils.exceptions import InternalConsistencyError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelInputs:
    """
    # ModelInputs
    Row-aligned arrays for B samples over N = (K+1)L augmented positions.

    - items / position_ids / source_slot / mask: (B, N)
    - targets / labels / user_ids: (B,)
    - slot_embeddings: (B, K+1, d') frozen behavior embeddings, slot 0 = target user
    - slot_present: (B, K+1) whether a slot has a user with an embedding
    - history_lengths: (B,) untruncated history length, for grouping
    - aug_ratios: (B,) augmented over own non-pad length
    """

    items: np.ndarray
    position_ids: np.ndarray
    source_slot: np.ndarray
    mask: np.ndarray
    targets: np.ndarray
    labels: np.ndarray
    user_ids: np.ndarray
    slot_embeddings: np.ndarray
    slot_present: np.ndarray
    history_lengths: np.ndarray
    aug_ratios: np.ndarray

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    @property
    def top_k(self) -> int:
        return self.slot_present.shape[1] - 1

    def take(self, rows) -> "ModelInputs":
        rows = np.asarray(rows, dtype=np.int64)
        return ModelInputs(
            **{name: getattr(self, name)[rows] for name in self.__dataclass_fields__}
        )


@dataclass(frozen=True)
class SampleContext:
    """Target behavior embedding and neighbors computed from one sample's own history."""

    embedding: np.ndarray
    neighbors: SimilarUserResult


def augment_sample(
    sample: TrainingSample,
    neighbors: Mapping[int, SimilarUserResult],
    sequences: Mapping[int, BehaviorSequence],
    max_length: int,
    top_k: int,
    scheme: str,
    context: Optional[SampleContext] = None,
) -> AugmentedSequence:
    if context is not None:
        found = context.neighbors
    else:
        found = neighbors.get(sample.user_id, SimilarUserResult())
    return build_augmented(sample.history, found, sequences, max_length, top_k, scheme)


def collate(
    samples: Sequence[TrainingSample],
    neighbors: Mapping[int, SimilarUserResult],
    sequences: Mapping[int, BehaviorSequence],
    embeddings: Mapping[int, np.ndarray],
    max_length: int,
    top_k: int,
    scheme: str = "UTPE",
    d_prime: Optional[int] = None,
    contexts: Optional[Sequence[SampleContext]] = None,
) -> ModelInputs:
    """
    `sequences` holds the neighbor histories, `embeddings` the frozen behavior
    embedding of every user that may fill a slot (targets included). Row-aligned
    `contexts` replace the target embedding and the neighbor lookup per sample.
    """
    if not samples:
        raise InternalConsistencyError("cannot collate an empty sample list")
    if contexts is not None and len(contexts) != len(samples):
        raise InternalConsistencyError(
            f"{len(contexts)} sample contexts for {len(samples)} samples"
        )
    if d_prime is None:
        d_prime = len(next(iter(embeddings.values())))
    row_contexts = contexts if contexts is not None else [None] * len(samples)
    augmented: List[AugmentedSequence] = [
        augment_sample(sample, neighbors, sequences, max_length, top_k, scheme, context)
        for sample, context in zip(samples, row_contexts)
    ]
    slot_embeddings = np.zeros((len(samples), top_k + 1, d_prime))
    slot_present = np.zeros((len(samples), top_k + 1), dtype=bool)
    for row, aug in enumerate(augmented):
        for k, user_id in enumerate(aug.user_ids):
            if user_id is None:
                continue
            if k == 0 and row_contexts[row] is not None:
                vector = row_contexts[row].embedding
            else:
                vector = embeddings.get(user_id)
            if vector is None:
                if k == 0:
                    raise InternalConsistencyError(f"no behavior embedding for target user {user_id}")
                continue
            slot_embeddings[row, k] = vector
            slot_present[row, k] = True

    return ModelInputs(
        items=np.stack([aug.items for aug in augmented]),
        position_ids=np.stack([aug.position_ids for aug in augmented]),
        source_slot=np.stack([aug.source_slot for aug in augmented]),
        mask=np.stack([aug.mask for aug in augmented]),
        targets=np.array([s.item_id for s in samples], dtype=np.int64),
        labels=np.array([s.label for s in samples], dtype=np.float64),
        user_ids=np.array([s.user_id for s in samples], dtype=np.int64),
        slot_embeddings=slot_embeddings,
        slot_present=slot_present,
        history_lengths=np.array([s.history.length for s in samples], dtype=np.int64),
        aug_ratios=np.array([augmentation_ratio(aug) for aug in augmented]),
    )
