"""
User similarity measures. Higher always means more similar: euclidean distance
is negated, jaccard compares item ID sets, the rest compare behavior embeddings.
"""

from typing import AbstractSet, Sequence, Union

import numpy as np

from main.utils.exceptions import ConfigurationError, UndefinedSimilarityError

DENSE_MEASURES = ("cosine", "inner_product", "euclidean")
SET_MEASURES = ("jaccard",)
MEASURES = DENSE_MEASURES + SET_MEASURES


def check_measure(measure: str) -> str:
    if measure not in MEASURES:
        raise ConfigurationError(f"unknown similarity measure '{measure}', expected one of {MEASURES}")
    return measure


def jaccard(a: AbstractSet[int], b: AbstractSet[int]) -> float:
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def similarity(measure: str, a, b) -> float:
    """Score one pair: embeddings for dense measures, item ID sets for jaccard."""
    check_measure(measure)
    if measure == "jaccard":
        return jaccard(frozenset(a), frozenset(b))
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if measure == "inner_product":
        return float(np.dot(a, b))
    if measure == "euclidean":
        return -float(np.linalg.norm(a - b))
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise UndefinedSimilarityError("cosine similarity with a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def score_against(
    measure: str,
    query: Union[np.ndarray, AbstractSet[int]],
    candidates: Union[np.ndarray, Sequence[AbstractSet[int]]],
) -> np.ndarray:
    """Vectorized `similarity` of one query against every candidate row."""
    check_measure(measure)
    if measure == "jaccard":
        query = frozenset(query)
        return np.array([jaccard(query, items) for items in candidates], dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    matrix = np.asarray(candidates, dtype=np.float64)
    if measure == "inner_product":
        return matrix @ query
    if measure == "euclidean":
        return -np.linalg.norm(matrix - query[None, :], axis=1)
    norms = np.linalg.norm(matrix, axis=1)
    query_norm = np.linalg.norm(query)
    if query_norm == 0 or np.any(norms == 0):
        raise UndefinedSimilarityError("cosine similarity with a zero vector is undefined")
    return np.clip((matrix @ query) / (norms * query_norm), -1.0, 1.0)
