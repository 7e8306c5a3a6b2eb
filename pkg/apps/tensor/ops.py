"""
Differentiable operations on `Tensor`.

Shapes never broadcast implicitly: binary ops need equal shapes, `scale` takes a
python scalar and `expand` is the explicit way to repeat along a new axis.
"""

from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from main.utils.exceptions import (
    ConfigurationError,
    DimensionError,
    EmptyAttentionError,
    NumericDomainError,
)

from .autograd import Tensor

ArrayLike = Union[Tensor, np.ndarray, float, int, Sequence]


def as_tensor(value: ArrayLike) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def _same_shape(name: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{name}: shape mismatch {a.shape} vs {b.shape}")


def _normalize_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise DimensionError(f"axis {axis} out of range for {ndim}-d tensor")
    return axis % ndim


# Linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """a[..., m, k] @ b[k, n]; leading axes of `a` are treated as a batch."""
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    k, n = b.shape

    def backward(grad):
        grad_a = grad @ b.data.T
        grad_b = a.data.reshape(-1, k).T @ grad.reshape(-1, n)
        return grad_a, grad_b

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched a[B, m, k] @ b[B, k, n]."""
    if (
        a.ndim != 3
        or b.ndim != 3
        or a.shape[0] != b.shape[0]
        or a.shape[2] != b.shape[1]
    ):
        raise DimensionError(f"bmm: cannot multiply {a.shape} by {b.shape}")

    def backward(grad):
        return (
            grad @ b.data.transpose(0, 2, 1),
            a.data.transpose(0, 2, 1) @ grad,
        )

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "bmm")


# Elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return Tensor.from_op(
        a.data + b.data, (a, b), lambda grad: (grad, grad), "add"
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return Tensor.from_op(
        a.data - b.data, (a, b), lambda grad: (grad, -grad), "sub"
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    return Tensor.from_op(
        a.data * b.data,
        (a, b),
        lambda grad: (grad * b.data, grad * a.data),
        "mul",
    )


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return Tensor.from_op(
        a.data * factor, (a,), lambda grad: (grad * factor,), "scale"
    )


def relu(a: Tensor) -> Tensor:
    active = a.data > 0
    return Tensor.from_op(
        np.where(active, a.data, 0.0), (a,), lambda grad: (grad * active,), "relu"
    )


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)
    return Tensor.from_op(
        out, (a,), lambda grad: (grad * out * (1.0 - out),), "sigmoid"
    )


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor.from_op(out, (a,), lambda grad: (grad * out,), "exp")


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        bad = float(a.data[a.data <= 0].reshape(-1)[0])
        raise NumericDomainError(f"log of non-positive value {bad}")
    return Tensor.from_op(np.log(a.data), (a,), lambda grad: (grad / a.data,), "log")


def clip(a: Tensor, low: float, high: float) -> Tensor:
    inside = (a.data >= low) & (a.data <= high)
    return Tensor.from_op(
        np.clip(a.data, low, high), (a,), lambda grad: (grad * inside,), "clip"
    )


def dropout(
    a: Tensor, rate: float, rng: Optional[np.random.Generator], training: bool
) -> Tensor:
    """Inverted dropout; identity outside training or at rate 0."""
    if not training or rate <= 0.0:
        return a
    if rng is None:
        raise ConfigurationError("dropout in training mode needs a random generator")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, Tensor(keep))


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "relu": relu,
    "sigmoid": sigmoid,
    "exp": exp,
    "log": log,
}


def elementwise(op: str, *operands: Tensor, factor: Optional[float] = None) -> Tensor:
    """Dispatch one of add, sub, mul, relu, sigmoid, exp, log, scale by name."""
    if op == "scale":
        if factor is None or len(operands) != 1:
            raise ConfigurationError("scale takes one operand and a factor")
        return scale(operands[0], factor)
    if op not in _ELEMENTWISE:
        raise ConfigurationError(f"unknown elementwise op '{op}'")
    return _ELEMENTWISE[op](*operands)


# Attention


def softmax_masked(logits: Tensor, mask) -> Tensor:
    """
    Softmax over the last axis restricted to `mask`. Masked entries are excluded
    from the max and the normalizer and come out exactly 0.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.shape:
        raise DimensionError(
            f"softmax_masked: mask shape {mask.shape} vs logits {logits.shape}"
        )
    if logits.ndim == 0 or not np.all(mask.any(axis=-1)):
        raise EmptyAttentionError("softmax over a fully masked row")
    x = logits.data
    row_max = np.max(np.where(mask, x, -np.inf), axis=-1, keepdims=True)
    weights = np.where(mask, np.exp(np.where(mask, x - row_max, 0.0)), 0.0)
    out = weights / weights.sum(axis=-1, keepdims=True)

    def backward(grad):
        return (out * (grad - (grad * out).sum(axis=-1, keepdims=True)),)

    return Tensor.from_op(out, (logits,), backward, "softmax_masked")


# Indexing


def gather_rows(table: Tensor, indices) -> Tensor:
    """Row lookup; output shape is indices.shape + (d,). Backward scatter-adds."""
    if table.ndim != 2:
        raise DimensionError(f"gather_rows: table must be 2-d, got {table.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    rows, width = table.shape
    out_of_range = (idx < 0) | (idx >= rows)
    if np.any(out_of_range):
        bad = int(idx[out_of_range].reshape(-1)[0])
        raise IndexError(f"row index {bad} out of range for table with {rows} rows")

    def backward(grad):
        grad_table = np.zeros(table.shape)
        np.add.at(grad_table, idx.reshape(-1), grad.reshape(-1, width))
        return (grad_table,)

    return Tensor.from_op(
        table.data[idx].reshape(idx.shape + (width,)), (table,), backward, "gather_rows"
    )


# Shape algebra


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise DimensionError("concat of an empty list")
    ndim = tensors[0].ndim
    axis = _normalize_axis(axis, ndim)
    reference = tensors[0].shape
    for tensor in tensors[1:]:
        other = tensor.shape
        if len(other) != ndim or any(
            other[i] != reference[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError(
                f"concat: incompatible shapes {reference} and {other} on axis {axis}"
            )
    sizes = [tensor.shape[axis] for tensor in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def backward(grad):
        return tuple(np.split(grad, cuts, axis=axis))

    return Tensor.from_op(
        np.concatenate([tensor.data for tensor in tensors], axis=axis),
        tensors,
        backward,
        "concat",
    )


def reduce_sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    if axis is not None:
        axis = _normalize_axis(axis, a.ndim)

    def backward(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, a.shape).copy(),)

    return Tensor.from_op(
        a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "reduce_sum"
    )


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    count = a.size if axis is None else a.shape[_normalize_axis(axis, a.ndim)]
    if count == 0:
        raise DimensionError(f"mean over an empty axis of {a.shape}")
    return scale(reduce_sum(a, axis=axis), 1.0 / count)


def expand(a: Tensor, axis: int, size: int) -> Tensor:
    """Insert a new axis at `axis` and repeat `size` times along it."""
    axis = _normalize_axis(axis, a.ndim + 1)
    out = np.repeat(np.expand_dims(a.data, axis), size, axis=axis)
    return Tensor.from_op(out, (a,), lambda grad: (grad.sum(axis=axis),), "expand")


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    original = a.shape
    return Tensor.from_op(
        a.data.reshape(shape), (a,), lambda grad: (grad.reshape(original),), "reshape"
    )


def transpose(a: Tensor, axes: Iterable[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(
        a.data.transpose(axes),
        (a,),
        lambda grad: (grad.transpose(inverse),),
        "transpose",
    )


def narrow(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Slice [start, stop) along `axis`."""
    axis = _normalize_axis(axis, a.ndim)
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(grad):
        full = np.zeros(a.shape)
        full[index] = grad
        return (full,)

    return Tensor.from_op(a.data[index], (a,), backward, "narrow")


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """x[..., n] + bias[n], with the bias expanded explicitly over the leading axes."""
    if bias.ndim != 1 or x.ndim < 1 or x.shape[-1] != bias.shape[0]:
        raise DimensionError(f"add_bias: cannot add bias {bias.shape} to {x.shape}")
    expanded = bias
    for size in reversed(x.shape[:-1]):
        expanded = expand(expanded, 0, size)
    return add(x, expanded)
