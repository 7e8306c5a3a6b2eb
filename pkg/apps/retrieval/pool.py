"""
User retrieval pool built from train-split users, queried by exact brute-force scan.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from apps.augmentation.sequences import BehaviorSequence
from apps.encoder.sasrec import BehaviorEmbedding, EncoderParams, encode_many
from main.utils.artifacts import read_tensor_file, write_tensor_file
from main.utils.exceptions import (
    ConfigurationError,
    InternalConsistencyError,
    LeakageError,
)

from .similarity import DENSE_MEASURES, check_measure, score_against

logger = logging.getLogger(__name__)

TRAIN_SPLIT = "train"


@dataclass(frozen=True)
class SimilarUser:
    user_id: int
    score: float


@dataclass(frozen=True)
class SimilarUserResult:
    """Neighbors by descending score (ties by ascending user ID). `warning` flags a query without embedding."""

    entries: Tuple[SimilarUser, ...] = ()
    warning: bool = False

    @property
    def user_ids(self) -> Tuple[int, ...]:
        return tuple(entry.user_id for entry in self.entries)

    @property
    def scores(self) -> Tuple[float, ...]:
        return tuple(entry.score for entry in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def head(self, k: int) -> "SimilarUserResult":
        return SimilarUserResult(self.entries[:k], self.warning)

    def above(self, threshold: Optional[float]) -> "SimilarUserResult":
        if threshold is None:
            return self
        return SimilarUserResult(
            tuple(entry for entry in self.entries if entry.score >= threshold), self.warning
        )


@dataclass(frozen=True)
class RetrievalPool:
    """
    # RetrievalPool
    - user_ids: sorted, unique, all from the train split
    - embeddings: M x d' frozen behavior embeddings, one row per user
    - item_sets: per-user item ID sets for set-based measures
    """

    user_ids: np.ndarray
    embeddings: np.ndarray
    item_sets: Tuple[frozenset, ...] = field(default=())
    split: str = TRAIN_SPLIT

    def __post_init__(self):
        if len(np.unique(self.user_ids)) != len(self.user_ids):
            raise InternalConsistencyError("retrieval pool user IDs are not unique")
        if self.embeddings.shape[0] != len(self.user_ids):
            raise InternalConsistencyError(
                f"pool has {len(self.user_ids)} users but {self.embeddings.shape[0]} embedding rows"
            )
        if self.item_sets and len(self.item_sets) != len(self.user_ids):
            raise InternalConsistencyError("pool item sets do not match its users")
        if not np.all(np.isfinite(self.embeddings)):
            raise InternalConsistencyError("pool embeddings contain non-finite values")
        if self.split != TRAIN_SPLIT:
            raise LeakageError(f"retrieval pool must be built from '{TRAIN_SPLIT}', got '{self.split}'")

    @property
    def size(self) -> int:
        return len(self.user_ids)

    def save(self, path: Path) -> Path:
        lengths = np.array([len(items) for items in self.item_sets], dtype=np.int64)
        values = np.array(
            [item for items in self.item_sets for item in sorted(items)], dtype=np.int64
        )
        return write_tensor_file(
            path,
            {
                "user_ids": self.user_ids.astype(np.int64),
                "embeddings": self.embeddings,
                "item_set_lengths": lengths,
                "item_set_values": values,
            },
        )

    @classmethod
    def load(cls, path: Path) -> "RetrievalPool":
        arrays = read_tensor_file(path)
        bounds = np.concatenate([[0], np.cumsum(arrays["item_set_lengths"])])
        values = arrays["item_set_values"]
        item_sets = tuple(
            frozenset(int(v) for v in values[bounds[i] : bounds[i + 1]])
            for i in range(len(bounds) - 1)
        )
        return cls(arrays["user_ids"], arrays["embeddings"], item_sets)


def build_pool(
    users: Sequence[BehaviorSequence],
    encoder: EncoderParams,
    embeddings: Optional[Mapping[int, BehaviorEmbedding]] = None,
) -> RetrievalPool:
    """
    One row per train user with a non-empty history, ordered by user ID.
    `embeddings` reuses a precomputed dump instead of re-encoding.
    """
    if not encoder.is_frozen:
        raise ConfigurationError("the retrieval pool needs a frozen encoder")
    leaked = sorted(s.user_id for s in users if s.split != TRAIN_SPLIT)
    if leaked:
        raise LeakageError(
            f"{len(leaked)} non-train users passed to build_pool, e.g. {leaked[:5]}"
        )
    ordered = sorted((s for s in users if s.length > 0), key=lambda s: s.user_id)
    if len({s.user_id for s in ordered}) != len(ordered):
        raise InternalConsistencyError("duplicate user in pool input")
    if embeddings is None:
        encoded = encode_many(ordered, encoder)
    else:
        encoded = [embeddings[s.user_id] for s in ordered]
    if any(e.empty for e in encoded):
        raise InternalConsistencyError("pool rows must come from non-empty histories")

    width = encoder.d_prime
    matrix = np.stack([e.vector for e in encoded]) if encoded else np.zeros((0, width))
    pool = RetrievalPool(
        user_ids=np.array([s.user_id for s in ordered], dtype=np.int64),
        embeddings=matrix,
        item_sets=tuple(frozenset(s.items) for s in ordered),
    )
    logger.info(f"Built retrieval pool with {pool.size} train users (d'={width})")
    return pool


def retrieve_topk(
    pool: RetrievalPool,
    query_id: int,
    query_embedding: Optional[BehaviorEmbedding],
    k: int,
    measure: str = "cosine",
    threshold: Optional[float] = None,
    query_items: Optional[AbstractSet[int]] = None,
) -> SimilarUserResult:
    """Exact top-K with the query user excluded and ties broken by ascending user ID."""
    if k < 0:
        raise ConfigurationError(f"K must be non-negative, got {k}")
    check_measure(measure)
    if k == 0 or pool.size == 0:
        return SimilarUserResult()

    if measure in DENSE_MEASURES:
        if query_embedding is None or query_embedding.empty:
            logger.warning(f"user {query_id} has no behavior embedding; no neighbors retrieved")
            return SimilarUserResult(warning=True)
        scores = score_against(measure, query_embedding.vector, pool.embeddings)
    else:
        if not query_items:
            logger.warning(f"user {query_id} has no items; no neighbors retrieved")
            return SimilarUserResult(warning=True)
        scores = score_against(measure, query_items, pool.item_sets)

    keep = pool.user_ids != query_id
    if threshold is not None:
        keep &= scores >= threshold
    ids, scores = pool.user_ids[keep], scores[keep]
    order = np.lexsort((ids, -scores))[:k]
    return SimilarUserResult(
        tuple(SimilarUser(int(ids[i]), float(scores[i])) for i in order)
    )


def retrieve_all(
    pool: RetrievalPool,
    queries: Iterable[Tuple[int, Optional[BehaviorEmbedding], AbstractSet[int]]],
    k: int,
    measure: str = "cosine",
    threshold: Optional[float] = None,
    threads: int = 1,
) -> Dict[int, SimilarUserResult]:
    """Neighbors for many users; results are keyed and ordered by user ID whatever `threads` is."""
    queries = sorted(queries, key=lambda query: query[0])

    def run(query):
        user_id, embedding, items = query
        return user_id, retrieve_topk(pool, user_id, embedding, k, measure, threshold, items)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(run, queries))
    else:
        results = [run(query) for query in queries]
    return dict(results)
