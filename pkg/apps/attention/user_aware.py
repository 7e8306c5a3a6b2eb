"""
User-aware target attention over an augmented behavior sequence.

Two correlation signals are computed per position: item-item (candidate item vs the
behavior's item, each plus its position embedding) and user-user (target user's
adapted behavior embedding vs that of the user the behavior came from). Their logits
are summed before one masked softmax, and the pooled vector is the weighted sum of
query-value element-wise products, item space and user space concatenated.

All functions are batched: position arrays are (B, N) with N = (K+1)L.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from apps.tensor import ParameterSet, Tensor
from apps.tensor import ops
from main.utils.exceptions import ConfigurationError, DimensionError, InternalConsistencyError

PROJECTIONS = ("query", "key", "value")


def attention_arrays(
    rows: int, d_item: int, d_user: int, rng: np.random.Generator, prefix: str = "attention"
) -> Dict[str, np.ndarray]:
    """Position tables of `rows` rows and the six square projections."""
    arrays = {
        f"{prefix}.item_positions": rng.normal(0.0, 0.05, (rows, d_item)),
        f"{prefix}.user_positions": rng.normal(0.0, 0.05, (rows, d_user)),
    }
    for space, width in (("item", d_item), ("user", d_user)):
        bound = math.sqrt(3.0 / width)
        for name in PROJECTIONS:
            arrays[f"{prefix}.{space}_{name}"] = rng.uniform(-bound, bound, (width, width))
    return arrays


@dataclass(frozen=True)
class UserAwareAttentionParams:
    item_positions: Tensor
    user_positions: Tensor
    item_query: Tensor
    item_key: Tensor
    item_value: Tensor
    user_query: Tensor
    user_key: Tensor
    user_value: Tensor

    @property
    def d_item(self) -> int:
        return self.item_positions.shape[1]

    @property
    def d_user(self) -> int:
        return self.user_positions.shape[1]

    @property
    def rows(self) -> int:
        return self.item_positions.shape[0]

    @classmethod
    def from_parameter_set(
        cls, params: ParameterSet, prefix: str = "attention"
    ) -> "UserAwareAttentionParams":
        fields = {
            name: params[f"{prefix}.{name}"]
            for name in ("item_positions", "user_positions")
        }
        for space in ("item", "user"):
            for name in PROJECTIONS:
                fields[f"{space}_{name}"] = params[f"{prefix}.{space}_{name}"]
        return cls(**fields)


@dataclass(frozen=True)
class Branch:
    """
    One correlation signal.

    - target: position-aware target vector (B, D), its position is ID 0
    - behaviors: position-aware behavior vectors (B, N, D)
    - query / keys / values: projections of the above
    """

    target: Tensor
    behaviors: Tensor
    query: Tensor
    keys: Tensor
    values: Tensor

    @property
    def width(self) -> int:
        return self.target.shape[1]


@dataclass(frozen=True)
class AttentionOutput:
    pooled: Tensor
    weights: Tensor


def _check_positions(position_ids: np.ndarray, rows: int) -> np.ndarray:
    position_ids = np.asarray(position_ids, dtype=np.int64)
    if position_ids.ndim != 2:
        raise DimensionError(f"position ids must be (batch, length), got {position_ids.shape}")
    if position_ids.size and position_ids.max() >= rows:
        raise ConfigurationError(
            f"position id {int(position_ids.max())} needs a table of more than {rows} rows"
        )
    return position_ids


def _branch(
    target: Tensor,
    behaviors: Tensor,
    position_ids: np.ndarray,
    table: Tensor,
    query: Tensor,
    key: Tensor,
    value: Tensor,
) -> Branch:
    batch, length = position_ids.shape
    width = table.shape[1]
    if target.shape != (batch, width) or behaviors.shape != (batch, length, width):
        raise DimensionError(
            f"branch inputs {target.shape} / {behaviors.shape} do not match "
            f"positions {position_ids.shape} and width {width}"
        )
    target_bar = ops.add(target, ops.gather_rows(table, np.zeros(batch, dtype=np.int64)))
    behaviors_bar = ops.add(behaviors, ops.gather_rows(table, position_ids))
    q = ops.matmul(target_bar, query)
    k = ops.matmul(behaviors_bar, key)
    v = ops.matmul(behaviors_bar, value)
    return Branch(target_bar, behaviors_bar, q, k, v)


def _scaled_scores(branch: Branch) -> Tensor:
    length = branch.keys.shape[1]
    products = ops.mul(ops.expand(branch.query, 1, length), branch.keys)
    return ops.scale(ops.reduce_sum(products, axis=-1), 1.0 / math.sqrt(branch.width))


def item_branch(
    item_embeddings: Tensor,
    target_item: Tensor,
    position_ids: np.ndarray,
    params: UserAwareAttentionParams,
) -> Branch:
    position_ids = _check_positions(position_ids, params.rows)
    return _branch(
        target_item,
        item_embeddings,
        position_ids,
        params.item_positions,
        params.item_query,
        params.item_key,
        params.item_value,
    )


def user_branch(
    slot_embeddings: Tensor,
    source_slot: np.ndarray,
    position_ids: np.ndarray,
    params: UserAwareAttentionParams,
    slot_present: Optional[np.ndarray] = None,
    mask: Optional[np.ndarray] = None,
) -> Branch:
    """
    `slot_embeddings` is (B, K+1, d) in slot order (k=0 is the target user). Every
    position takes the adapted embedding of its source slot.
    """
    position_ids = _check_positions(position_ids, params.rows)
    source_slot = np.asarray(source_slot, dtype=np.int64)
    if slot_embeddings.ndim != 3 or source_slot.shape != position_ids.shape:
        raise DimensionError(
            f"slot embeddings {slot_embeddings.shape} / source slots {source_slot.shape} "
            f"do not match positions {position_ids.shape}"
        )
    batch, slots, width = slot_embeddings.shape
    if slot_present is not None:
        slot_present = np.asarray(slot_present, dtype=bool)
        visible = np.ones(source_slot.shape, dtype=bool) if mask is None else np.asarray(mask)
        lacking = visible & ~np.take_along_axis(slot_present, source_slot, axis=1)
        if np.any(lacking):
            b, i = (int(v) for v in np.argwhere(lacking)[0])
            raise InternalConsistencyError(
                f"sample {b} position {i} comes from slot {int(source_slot[b, i])} "
                "which has no behavior embedding"
            )
    flat = ops.reshape(slot_embeddings, (batch * slots, width))
    offsets = np.arange(batch, dtype=np.int64) * slots
    behaviors = ops.gather_rows(flat, offsets[:, None] + source_slot)
    target = ops.gather_rows(flat, offsets)
    return _branch(
        target,
        behaviors,
        position_ids,
        params.user_positions,
        params.user_query,
        params.user_key,
        params.user_value,
    )


def item_logits(item: Branch) -> Tensor:
    """Item-item logits (B, N), scaled by 1/sqrt(d_item)."""
    return _scaled_scores(item)


def user_logits(user: Branch) -> Tensor:
    """User-user logits (B, N) against the target user's adapted embedding, scaled by 1/sqrt(d)."""
    return _scaled_scores(user)


def attend(
    item_scores: Tensor,
    user_scores: Optional[Tensor],
    mask: np.ndarray,
    query: Tensor,
    values: Tensor,
) -> AttentionOutput:
    """softmax over the summed logits, then sum_i weight_i * (query * value_i)."""
    fused = item_scores if user_scores is None else ops.add(item_scores, user_scores)
    weights = ops.softmax_masked(fused, mask)
    batch, length = weights.shape
    if query.ndim != 2 or values.shape != (batch, length, query.shape[1]):
        raise DimensionError(f"attend: query {query.shape} vs values {values.shape}")
    width = query.shape[1]
    products = ops.mul(ops.expand(query, 1, length), values)
    pooled = ops.reduce_sum(ops.mul(ops.expand(weights, 2, width), products), axis=1)
    return AttentionOutput(pooled, weights)


def user_aware_attention(
    item: Branch,
    user: Branch,
    mask: np.ndarray,
    params: UserAwareAttentionParams,
    literal_pairing: bool = False,
) -> AttentionOutput:
    """
    Pooled width is d_item + d. With `literal_pairing` the user projections act on
    item-space vectors and the other way round, which needs d_item == d.
    """
    if literal_pairing:
        if params.d_item != params.d_user:
            raise ConfigurationError(
                f"literal pairing needs d_item == d, got {params.d_item} and {params.d_user}"
            )
        query = ops.concat(
            [ops.matmul(item.target, params.user_query), ops.matmul(user.target, params.item_query)],
            axis=1,
        )
        values = ops.concat(
            [
                ops.matmul(item.behaviors, params.user_value),
                ops.matmul(user.behaviors, params.item_value),
            ],
            axis=2,
        )
    else:
        query = ops.concat([item.query, user.query], axis=1)
        values = ops.concat([item.values, user.values], axis=2)
    return attend(item_logits(item), user_logits(user), mask, query, values)


def target_attention(item: Branch, mask: np.ndarray) -> AttentionOutput:
    """Item-only target attention; pooled width d_item."""
    return attend(item_logits(item), None, mask, item.query, item.values)
