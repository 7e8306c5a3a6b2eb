"""
Adam with bias correction over a `ParameterSet`.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from main.utils.exceptions import DimensionError, TrainingDivergenceError

from .parameters import ParameterSet

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass
class AdamState:
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: ParameterSet,
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = BETA1,
    beta2: float = BETA2,
    eps: float = EPSILON,
) -> Tuple[ParameterSet, AdamState]:
    """One Adam update. Frozen parameters are carried over untouched."""
    step = state.step + 1
    first, second, updated = {}, {}, {}
    for name, tensor in params.items():
        if name in params.frozen:
            continue
        grad = np.asarray(grads.get(name, np.zeros(tensor.shape)), dtype=np.float64)
        if grad.shape != tensor.shape:
            raise DimensionError(
                f"gradient for '{name}' has shape {grad.shape}, parameter has {tensor.shape}"
            )
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError(
                f"non-finite gradient for parameter '{name}'", parameter=name
            )
        m_prev = state.first_moment.get(name, np.zeros(tensor.shape))
        v_prev = state.second_moment.get(name, np.zeros(tensor.shape))
        if m_prev.shape != tensor.shape or v_prev.shape != tensor.shape:
            raise DimensionError(f"optimizer state for '{name}' does not match its shape")
        m = beta1 * m_prev + (1.0 - beta1) * grad
        v = beta2 * v_prev + (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        first[name], second[name] = m, v
        updated[name] = tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params.with_arrays(updated), AdamState(step, first, second)


class Adam:
    """Stateful wrapper used by the training loops."""

    def __init__(self, lr: float):
        self.lr = lr
        self.state = AdamState()

    def step(self, params: ParameterSet) -> ParameterSet:
        params, self.state = adam_step(params, params.grads(), self.state, self.lr)
        return params
