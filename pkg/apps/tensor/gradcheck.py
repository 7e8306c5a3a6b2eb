"""
Central finite-difference checks for analytic gradients.
"""

from typing import Callable, Dict, Mapping, Optional

import numpy as np

from .autograd import Tensor

ScalarFn = Callable[[Dict[str, Tensor]], Tensor]


def _leaves(arrays: Mapping[str, np.ndarray], requires_grad: bool) -> Dict[str, Tensor]:
    return {name: Tensor(value, requires_grad=requires_grad) for name, value in arrays.items()}


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradcheck(
    fn: ScalarFn,
    inputs: Mapping[str, np.ndarray],
    h: float = 1e-5,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """
    Compare backward against central differences for every input of `fn`.
    `max_entries` limits the perturbed coordinates per input to a seeded sample.
    Returns the norm-wise relative error per input name.
    """
    arrays = {name: np.array(value, dtype=np.float64) for name, value in inputs.items()}
    leaves = _leaves(arrays, requires_grad=True)
    fn(leaves).backward()
    rng = np.random.default_rng(seed)

    errors = {}
    for name, base in arrays.items():
        analytic = leaves[name].grad
        if analytic is None:
            analytic = np.zeros(base.shape)
        coords = np.arange(base.size)
        if max_entries is not None and base.size > max_entries:
            coords = np.sort(rng.choice(base.size, size=max_entries, replace=False))
        numeric = np.zeros(len(coords))
        for slot, flat in enumerate(coords):
            values = []
            for step in (h, -h):
                perturbed = base.copy().reshape(-1)
                perturbed[flat] += step
                shifted = {**arrays, name: perturbed.reshape(base.shape)}
                values.append(fn(_leaves(shifted, requires_grad=False)).item())
            numeric[slot] = (values[0] - values[1]) / (2.0 * h)
        errors[name] = relative_error(analytic.reshape(-1)[coords], numeric)
    return errors
