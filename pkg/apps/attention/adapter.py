"""
Behavior-embedding adapter: a small ReLU perceptron that maps frozen d'-wide
encoder embeddings into the CTR model's d-wide user space.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from apps.encoder.sasrec import BehaviorEmbedding
from apps.tensor import ParameterSet, Tensor
from apps.tensor import ops
from main.utils.exceptions import ConfigurationError, DimensionError

EmbeddingInput = Union[BehaviorEmbedding, Tensor, np.ndarray]


def adapter_arrays(
    d_prime: int, hidden: Sequence[int], rng: np.random.Generator, prefix: str = "adapter"
) -> Dict[str, np.ndarray]:
    """Glorot-uniform weights and zero biases for layers d' -> hidden[0] -> ... -> hidden[-1]."""
    if not hidden:
        raise ConfigurationError("adapter needs at least one layer")
    arrays = {}
    widths = [d_prime, *hidden]
    for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        arrays[f"{prefix}.w{layer}"] = rng.uniform(-bound, bound, (fan_in, fan_out))
        arrays[f"{prefix}.b{layer}"] = np.zeros(fan_out)
    return arrays


@dataclass(frozen=True)
class AdapterParams:
    """Views of the adapter layers inside a model parameter set."""

    weights: Tuple[Tensor, ...]
    biases: Tuple[Tensor, ...]
    dropout: float = 0.0

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    @classmethod
    def from_parameter_set(
        cls, params: ParameterSet, dropout: float = 0.0, prefix: str = "adapter"
    ) -> "AdapterParams":
        weights, biases = [], []
        layer = 0
        while f"{prefix}.w{layer}" in params:
            weights.append(params[f"{prefix}.w{layer}"])
            biases.append(params[f"{prefix}.b{layer}"])
            layer += 1
        if not weights:
            raise ConfigurationError(f"no adapter layers under '{prefix}'")
        return cls(tuple(weights), tuple(biases), dropout)


def _as_constant(e_b: EmbeddingInput) -> Tensor:
    # Behavior embeddings stay frozen: the adapter sees them as constants.
    if isinstance(e_b, BehaviorEmbedding):
        return Tensor(e_b.vector)
    if isinstance(e_b, Tensor):
        return e_b.detach()
    return Tensor(e_b)


def adapt(
    e_b: EmbeddingInput,
    params: AdapterParams,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """
    Adapted embedding(s) of width d. Accepts one embedding or a stack (..., d').
    Dropout is applied after every layer in training mode only.
    """
    x = _as_constant(e_b)
    if x.ndim == 0:
        raise DimensionError("adapter input must be at least 1-d")
    if x.shape[-1] != params.input_dim:
        raise ConfigurationError(
            f"behavior embedding width {x.shape[-1]} does not match adapter input "
            f"{params.input_dim}; was the encoder trained with a different d'?"
        )
    for weight, bias in zip(params.weights, params.biases):
        x = ops.relu(ops.add_bias(ops.matmul(x, weight), bias))
        x = ops.dropout(x, params.dropout, rng, training)
    return x
