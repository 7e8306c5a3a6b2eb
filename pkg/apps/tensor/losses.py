from typing import Optional

import numpy as np

from main.utils.exceptions import DimensionError

from . import ops
from .autograd import Tensor

PROBABILITY_CLAMP = 1e-12


def binary_cross_entropy(
    probs: Tensor, labels, weights: Optional[np.ndarray] = None
) -> Tensor:
    """
    Mean negative log-likelihood of binary labels. Probabilities are clamped to
    [1e-12, 1 - 1e-12]; `weights` (0/1) restricts the mean to selected entries.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != probs.shape:
        raise DimensionError(
            f"binary_cross_entropy: predictions {probs.shape} vs labels {labels.shape}"
        )
    clamped = ops.clip(probs, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    positive = ops.mul(Tensor(labels), ops.log(clamped))
    negative = ops.mul(
        Tensor(1.0 - labels), ops.log(ops.sub(Tensor(np.ones(labels.shape)), clamped))
    )
    per_entry = ops.scale(ops.add(positive, negative), -1.0)
    if weights is None:
        return ops.mean(per_entry)
    weights = np.asarray(weights, dtype=np.float64)
    total = float(weights.sum())
    if total <= 0:
        raise DimensionError("binary_cross_entropy: no entries selected by weights")
    return ops.scale(ops.reduce_sum(ops.mul(per_entry, Tensor(weights))), 1.0 / total)
