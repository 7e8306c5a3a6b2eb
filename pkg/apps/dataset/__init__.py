"""
Interaction corpora: synthetic generation, interchange CSV, user splits and CTR samples.
"""

from .config import SyntheticConfig
from .interchange import (
    INTERACTION_COLUMNS,
    InteractionRecord,
    read_interactions,
    validate_interactions,
    write_interactions,
)
from .samples import SampleSet, TrainingSample, build_histories, make_samples, user_sequences
from .splits import SPLITS, split_by_user, users_by_split
from .synthetic import SyntheticCorpus, generate_synthetic

__all__ = [
    "SyntheticConfig",
    "INTERACTION_COLUMNS",
    "InteractionRecord",
    "read_interactions",
    "validate_interactions",
    "write_interactions",
    "SampleSet",
    "TrainingSample",
    "build_histories",
    "make_samples",
    "user_sequences",
    "SPLITS",
    "split_by_user",
    "users_by_split",
    "SyntheticCorpus",
    "generate_synthetic",
]
