import numpy as np

from apps.tensor import Tensor
from apps.tensor.losses import binary_cross_entropy
from main.utils.exceptions import DimensionError


def bce_loss(predictions, labels) -> Tensor:
    """Mean binary cross-entropy; predictions are clamped 1e-12 away from 0 and 1."""
    predictions = predictions if isinstance(predictions, Tensor) else Tensor(predictions)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.ndim != 1 or labels.shape != predictions.shape:
        raise DimensionError(
            f"bce_loss: {predictions.shape} predictions vs {labels.shape} labels"
        )
    if not np.all((labels == 0) | (labels == 1)):
        raise DimensionError("bce_loss: labels must be 0 or 1")
    return binary_cross_entropy(predictions, labels)
