"""
Self-attention sequence encoder producing frozen behavior embeddings.
"""

from .config import EncoderConfig
from .sasrec import BehaviorEmbedding, EncoderParams, encode, encode_many
from .training import pretrain_encoder

__all__ = [
    "EncoderConfig",
    "BehaviorEmbedding",
    "EncoderParams",
    "encode",
    "encode_many",
    "pretrain_encoder",
]
