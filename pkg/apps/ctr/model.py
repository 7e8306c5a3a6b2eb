"""
CTR predictor: item embeddings, a pluggable pooling layer over the augmented
behavior sequence, and an MLP head ending in a sigmoid.

MLP input by pooling mode (d = embedding width):
- suin: [pooled (2d) ; target item (d)]
- target_attention / avg: [pooled (d) ; target item (d)]
- keep_behavior_embeddings adds [adapted target user (d) ; mean adapted neighbor (d)]
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from apps.attention.adapter import AdapterParams, adapt, adapter_arrays
from apps.attention.user_aware import (
    UserAwareAttentionParams,
    attention_arrays,
    item_branch,
    target_attention,
    user_aware_attention,
    user_branch,
)
from apps.augmentation.positions import table_rows
from apps.augmentation.sequences import PAD_ITEM
from apps.tensor import ParameterSet, Tensor
from apps.tensor import ops
from apps.tensor.losses import PROBABILITY_CLAMP
from main.utils.artifacts import read_tensor_file, write_tensor_file
from main.utils.exceptions import ConfigurationError, EmptyAttentionError

from .batching import ModelInputs
from .config import ModelConfig
from .variants import VariantPlan, resolve_variant

logger = logging.getLogger(__name__)

POSITION_TABLES = ("attention.item_positions", "attention.user_positions")


def mlp_input_width(config: ModelConfig, plan: VariantPlan) -> int:
    pooled = 2 * config.d if plan.pooling == "suin" else config.d
    extra = 2 * config.d if plan.keep_behavior_embeddings else 0
    return pooled + config.d + extra


class ModelParams(ParameterSet):
    """
    # ModelParams
    - item_embedding: (n_items + 1) x d, row 0 is the pad item
    - adapter.w{i} / adapter.b{i}: behavior-embedding adapter (when the plan uses it)
    - attention.*: position tables and projections (suin / target_attention)
    - mlp.w{i} / mlp.b{i}: head layers, the last one has width 1
    """

    def __init__(self, arrays, config: ModelConfig, frozen=()):
        super().__init__(arrays, frozen)
        self.config = config
        self.plan = resolve_variant(config)

    @property
    def d_prime(self) -> Optional[int]:
        return self["adapter.w0"].shape[0] if "adapter.w0" in self else None

    @property
    def n_items(self) -> int:
        return self["item_embedding"].shape[0] - 1

    @property
    def mlp_layers(self) -> int:
        layers = 0
        while f"mlp.w{layers}" in self:
            layers += 1
        return layers

    @classmethod
    def initialize(
        cls, n_items: int, d_prime: int, config: ModelConfig, seed: int = 0
    ) -> "ModelParams":
        plan = resolve_variant(config)
        rng = np.random.default_rng(seed)
        items = rng.normal(0.0, 0.05, (n_items + 1, config.d))
        items[PAD_ITEM] = 0.0
        arrays = {"item_embedding": items}
        if plan.uses_adapter:
            arrays.update(adapter_arrays(d_prime, config.adapter_hidden, rng))
        if plan.uses_attention:
            rows = table_rows(config.L, plan.top_k)
            arrays.update(attention_arrays(rows, config.d, config.d, rng))
        frozen = []
        if plan.zero_positions and plan.uses_attention:
            for name in POSITION_TABLES:
                arrays[name] = np.zeros_like(arrays[name])
            frozen.extend(POSITION_TABLES)
        widths = [mlp_input_width(config, plan), *config.mlp_hidden, 1]
        for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            arrays[f"mlp.w{layer}"] = rng.uniform(-bound, bound, (fan_in, fan_out))
            arrays[f"mlp.b{layer}"] = np.zeros(fan_out)
        return cls(arrays, config, frozen=frozen)

    def save(self, path: Path) -> Path:
        arrays = dict(self.arrays())
        arrays["meta.frozen"] = np.array(
            [int(name in self.frozen) for name in self.names()], dtype=np.int64
        )
        return write_tensor_file(path, arrays)

    @classmethod
    def load(cls, path: Path, config: ModelConfig) -> "ModelParams":
        arrays = read_tensor_file(path)
        flags = arrays.pop("meta.frozen")
        frozen = [name for name, flag in zip(arrays, flags) if flag]
        params = cls(arrays, config, frozen=frozen)
        expected = cls.initialize(params.n_items, params.d_prime or 1, config)
        if set(expected.names()) != set(params.names()):
            raise ConfigurationError(
                f"saved model {path} does not match the configured variant "
                f"'{config.variant}' / pooling '{config.pooling}'"
            )
        return params


@dataclass(frozen=True)
class ForwardResult:
    probs: Tensor
    logits: Tensor
    attention_weights: Optional[Tensor] = None


def _masked_mean(values: Tensor, weights: np.ndarray) -> Tensor:
    """sum_i w_i * values[:, i] with constant weights (B, N)."""
    width = values.shape[2]
    return ops.reduce_sum(ops.mul(ops.expand(Tensor(weights), 2, width), values), axis=1)


def _avg_pool(behaviors: Tensor, mask: np.ndarray) -> Tensor:
    counts = mask.sum(axis=1, keepdims=True)
    if np.any(counts == 0):
        raise EmptyAttentionError("average pooling over a fully masked sequence")
    return _masked_mean(behaviors, mask / counts)


def _neighbor_mean(adapted: Tensor, slot_present: np.ndarray) -> Tensor:
    batch, slots, width = adapted.shape
    if slots == 1:
        return Tensor(np.zeros((batch, width)))
    present = slot_present[:, 1:].astype(np.float64)
    counts = np.maximum(present.sum(axis=1, keepdims=True), 1.0)
    return _masked_mean(ops.narrow(adapted, 1, 1, slots), present / counts)


def predict_batch(
    inputs: ModelInputs,
    params: ModelParams,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> ForwardResult:
    plan, config = params.plan, params.config
    if inputs.top_k != plan.top_k:
        raise ConfigurationError(
            f"inputs were built with K={inputs.top_k}, the model expects K={plan.top_k}"
        )
    table = params["item_embedding"]
    behaviors = ops.gather_rows(table, inputs.items)
    target = ops.gather_rows(table, inputs.targets)

    adapted = None
    if plan.uses_adapter:
        adapter = AdapterParams.from_parameter_set(params, dropout=config.adapter_dropout)
        adapted = adapt(inputs.slot_embeddings, adapter, training=training, rng=rng)

    weights = None
    if plan.pooling == "avg":
        pooled = _avg_pool(behaviors, inputs.mask)
    else:
        attention = UserAwareAttentionParams.from_parameter_set(params)
        item = item_branch(behaviors, target, inputs.position_ids, attention)
        if plan.pooling == "suin":
            user = user_branch(
                adapted,
                inputs.source_slot,
                inputs.position_ids,
                attention,
                slot_present=inputs.slot_present,
                mask=inputs.mask,
            )
            output = user_aware_attention(
                item, user, inputs.mask, attention, config.literal_projection_pairing
            )
        else:
            output = target_attention(item, inputs.mask)
        pooled, weights = output.pooled, output.weights

    features = [pooled, target]
    if plan.keep_behavior_embeddings:
        batch, _, width = adapted.shape
        features.append(ops.reshape(ops.narrow(adapted, 1, 0, 1), (batch, width)))
        features.append(_neighbor_mean(adapted, inputs.slot_present))
    x = ops.concat(features, axis=1)

    last = params.mlp_layers - 1
    for layer in range(params.mlp_layers):
        x = ops.add_bias(ops.matmul(x, params[f"mlp.w{layer}"]), params[f"mlp.b{layer}"])
        if layer < last:
            x = ops.relu(x)
    logits = ops.reshape(x, (len(inputs),))
    probs = ops.clip(ops.sigmoid(logits), PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    return ForwardResult(probs, logits, weights)


def forward(
    inputs: ModelInputs,
    params: ModelParams,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Click probabilities (B,), each strictly inside (0, 1) for finite inputs."""
    return predict_batch(inputs, params, training, rng).probs


def predict(
    inputs: ModelInputs, params: ModelParams, batch_size: int = 1024
) -> np.ndarray:
    """Evaluation-mode probabilities without building a gradient graph."""
    frozen = params.freeze()
    chunks = [
        forward(inputs.take(np.arange(start, min(start + batch_size, len(inputs)))), frozen).data
        for start in range(0, len(inputs), batch_size)
    ]
    return np.concatenate(chunks) if chunks else np.zeros(0)
