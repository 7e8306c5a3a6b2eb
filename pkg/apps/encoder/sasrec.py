"""
Causal self-attention sequence encoder.

A behavior sequence is left-padded to `max_len`, embedded as item + absolute
position, passed through residual attention / feed-forward blocks, and the hidden
state of the newest position is the user's behavior embedding.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Mapping, Optional, Sequence

import numpy as np

from apps.augmentation.sequences import PAD_ITEM, BehaviorSequence
from apps.tensor import ParameterSet, Tensor
from apps.tensor import ops
from main.utils.artifacts import read_tensor_file, write_tensor_file
from main.utils.exceptions import ConfigurationError, DimensionError, EmptyHistoryError

logger = logging.getLogger(__name__)

BLOCK_WEIGHTS = ("query", "key", "value", "ffn_in", "ffn_out")
BLOCK_BIASES = ("ffn_in_bias", "ffn_out_bias")


@dataclass(frozen=True)
class BehaviorEmbedding:
    """d'-dimensional summary of one user's history. `empty` marks the zero fallback."""

    user_id: int
    vector: np.ndarray
    frozen: bool = True
    empty: bool = False


class EncoderParams(ParameterSet):
    """
    # EncoderParams
    - item_embedding: (n_items + 1) x d', row 0 is the pad item
    - position_embedding: max_len x d'
    - block{b}.query / key / value / ffn_in / ffn_out: d' x d'
    - block{b}.ffn_in_bias / ffn_out_bias: d'
    """

    def __init__(self, arrays, n_blocks: int, n_heads: int, max_len: int, frozen=()):
        super().__init__(arrays, frozen)
        self.n_blocks = int(n_blocks)
        self.n_heads = int(n_heads)
        self.max_len = int(max_len)
        self._validate()

    def _validate(self) -> None:
        width = self.d_prime
        if self["position_embedding"].shape[0] < self.max_len:
            raise ConfigurationError(
                f"position table has {self['position_embedding'].shape[0]} rows, "
                f"max_len is {self.max_len}"
            )
        if width % self.n_heads:
            raise ConfigurationError(f"{self.n_heads} heads do not divide d'={width}")
        for block in range(self.n_blocks):
            for name in BLOCK_WEIGHTS:
                shape = self[f"block{block}.{name}"].shape
                if shape != (width, width):
                    raise DimensionError(f"block{block}.{name} must be {width}x{width}, got {shape}")

    @property
    def d_prime(self) -> int:
        return self["item_embedding"].shape[1]

    @property
    def n_items(self) -> int:
        return self["item_embedding"].shape[0] - 1

    @property
    def is_frozen(self) -> bool:
        return self.frozen == frozenset(self.names())

    @classmethod
    def initialize(
        cls,
        n_items: int,
        d_prime: int = 16,
        max_len: int = 20,
        n_blocks: int = 1,
        n_heads: int = 1,
        seed: int = 0,
        init_std: float = 0.1,
    ) -> "EncoderParams":
        rng = np.random.default_rng(seed)
        items = rng.normal(0.0, init_std, size=(n_items + 1, d_prime))
        items[PAD_ITEM] = 0.0
        arrays = {
            "item_embedding": items,
            "position_embedding": rng.normal(0.0, init_std, size=(max_len, d_prime)),
        }
        bound = math.sqrt(6.0 / (2 * d_prime))
        for block in range(n_blocks):
            for name in BLOCK_WEIGHTS:
                arrays[f"block{block}.{name}"] = rng.uniform(-bound, bound, (d_prime, d_prime))
            for name in BLOCK_BIASES:
                arrays[f"block{block}.{name}"] = np.zeros(d_prime)
        return cls(arrays, n_blocks=n_blocks, n_heads=n_heads, max_len=max_len)

    def save(self, path: Path) -> Path:
        arrays = dict(self.arrays())
        arrays["meta.shape"] = np.array([self.n_blocks, self.n_heads, self.max_len], dtype=np.int64)
        return write_tensor_file(path, arrays)

    @classmethod
    def load(cls, path: Path) -> "EncoderParams":
        arrays = read_tensor_file(path)
        n_blocks, n_heads, max_len = (int(v) for v in arrays.pop("meta.shape"))
        return cls(arrays, n_blocks, n_heads, max_len, frozen=arrays.keys())


def _attention_mask(tokens: np.ndarray) -> np.ndarray:
    """Causal mask restricted to real items; every query may always see itself."""
    length = tokens.shape[1]
    causal = np.tril(np.ones((length, length), dtype=bool))
    valid_keys = (tokens != PAD_ITEM)[:, None, :]
    return (causal[None] & valid_keys) | np.eye(length, dtype=bool)[None]


def _self_attention(x: Tensor, params: EncoderParams, prefix: str, mask: np.ndarray) -> Tensor:
    width = params.d_prime // params.n_heads
    query = ops.matmul(x, params[f"{prefix}.query"])
    key = ops.matmul(x, params[f"{prefix}.key"])
    value = ops.matmul(x, params[f"{prefix}.value"])
    heads = []
    for head in range(params.n_heads):
        if params.n_heads > 1:
            start, stop = head * width, (head + 1) * width
            q, k, v = (ops.narrow(t, 2, start, stop) for t in (query, key, value))
        else:
            q, k, v = query, key, value
        scores = ops.scale(ops.bmm(q, ops.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(width))
        heads.append(ops.bmm(ops.softmax_masked(scores, mask), v))
    return heads[0] if len(heads) == 1 else ops.concat(heads, axis=2)


def _feed_forward(h: Tensor, params: EncoderParams, prefix: str) -> Tensor:
    hidden = ops.relu(
        ops.add_bias(ops.matmul(h, params[f"{prefix}.ffn_in"]), params[f"{prefix}.ffn_in_bias"])
    )
    return ops.add_bias(
        ops.matmul(hidden, params[f"{prefix}.ffn_out"]), params[f"{prefix}.ffn_out_bias"]
    )


def hidden_states(tokens: np.ndarray, params: EncoderParams) -> Tensor:
    """Hidden state for every position of a (batch, length) token window."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2 or tokens.shape[1] > params.max_len:
        raise DimensionError(
            f"token window {tokens.shape} does not fit encoder max_len {params.max_len}"
        )
    batch, length = tokens.shape
    positions = np.broadcast_to(np.arange(length), (batch, length))
    x = ops.add(
        ops.gather_rows(params["item_embedding"], tokens),
        ops.gather_rows(params["position_embedding"], positions),
    )
    mask = _attention_mask(tokens)
    for block in range(params.n_blocks):
        prefix = f"block{block}"
        h = ops.add(x, _self_attention(x, params, prefix, mask))
        x = ops.add(h, _feed_forward(h, params, prefix))
    return x


def encode(sequence: BehaviorSequence, params: EncoderParams) -> BehaviorEmbedding:
    tokens, length = sequence.window(params.max_len)
    if length == 0:
        raise EmptyHistoryError(f"user {sequence.user_id} has no behaviors to encode")
    hidden = hidden_states(tokens[None, :], params)
    return BehaviorEmbedding(sequence.user_id, hidden.data[0, -1].copy(), frozen=params.is_frozen)


def encode_many(
    sequences: Sequence[BehaviorSequence], params: EncoderParams, batch_size: int = 256
) -> List[BehaviorEmbedding]:
    """Batched `encode`; empty histories get a zero vector flagged `empty`."""
    results: List[Optional[BehaviorEmbedding]] = [None] * len(sequences)
    filled = []
    for index, sequence in enumerate(sequences):
        if sequence.length == 0:
            results[index] = BehaviorEmbedding(
                sequence.user_id, np.zeros(params.d_prime), frozen=True, empty=True
            )
        else:
            filled.append(index)
    if len(filled) < len(sequences):
        logger.info(f"{len(sequences) - len(filled)} empty histories encoded as zero vectors")

    for start in range(0, len(filled), batch_size):
        chunk = filled[start : start + batch_size]
        tokens = np.stack([sequences[i].window(params.max_len)[0] for i in chunk])
        last = hidden_states(tokens, params).data[:, -1]
        for row, index in enumerate(chunk):
            results[index] = BehaviorEmbedding(
                sequences[index].user_id, last[row].copy(), frozen=params.is_frozen
            )
    return results


def embedding_table(embeddings: Sequence[BehaviorEmbedding]) -> Mapping[str, np.ndarray]:
    """Arrays for an embedding dump: user ids, vectors and the empty flags."""
    return {
        "user_ids": np.array([e.user_id for e in embeddings], dtype=np.int64),
        "embeddings": np.stack([e.vector for e in embeddings])
        if embeddings
        else np.zeros((0, 0)),
        "empty": np.array([int(e.empty) for e in embeddings], dtype=np.int64),
    }


def embeddings_from_table(arrays: Mapping[str, np.ndarray]) -> List[BehaviorEmbedding]:
    return [
        BehaviorEmbedding(int(uid), vector.copy(), frozen=True, empty=bool(flag))
        for uid, vector, flag in zip(arrays["user_ids"], arrays["embeddings"], arrays["empty"])
    ]
