"""
Similar-user retrieval over frozen behavior embeddings.
"""

from .config import RetrievalConfig
from .neighbors import read_neighbors, write_neighbors
from .pool import (
    RetrievalPool,
    SimilarUser,
    SimilarUserResult,
    build_pool,
    retrieve_all,
    retrieve_topk,
)
from .similarity import MEASURES, similarity

__all__ = [
    "RetrievalConfig",
    "read_neighbors",
    "write_neighbors",
    "RetrievalPool",
    "SimilarUser",
    "SimilarUserResult",
    "build_pool",
    "retrieve_all",
    "retrieve_topk",
    "MEASURES",
    "similarity",
]
