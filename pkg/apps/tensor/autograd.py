"""
Reverse-mode automatic differentiation over dense float64 arrays.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from main.utils.exceptions import (
    DimensionError,
    GraphReuseError,
    InternalConsistencyError,
)

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    # Tensor
    Dense value node in a differentiation graph.

    - data: read-only float64 array, row-major
    - requires_grad: whether backward populates `grad`
    - grad: array shaped like `data`, present after backward
    - parents / backward_fn: links recorded by the op that produced the tensor
    """

    def __init__(self, data, requires_grad: bool = False):
        array = np.array(data, dtype=np.float64)
        array.setflags(write=False)
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.parents: Tuple["Tensor", ...] = ()
        self.backward_fn: Optional[BackwardFn] = None
        self.op = "leaf"
        self._backward_done = False

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward_fn: BackwardFn,
        op: str,
    ) -> "Tensor":
        """Wrap an op result; the graph link is only kept when a parent needs grad."""
        out = cls.__new__(cls)
        array = np.asarray(data, dtype=np.float64)
        array.setflags(write=False)
        out.data = array
        out.requires_grad = any(parent.requires_grad for parent in parents)
        out.grad = None
        out.parents = tuple(parents) if out.requires_grad else ()
        out.backward_fn = backward_fn if out.requires_grad else None
        out.op = op
        out._backward_done = False
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self) -> "Graph":
        graph = Graph(self)
        graph.backward()
        return graph

    def __add__(self, other):
        from . import ops

        return ops.add(self, ops.as_tensor(other))

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, ops.as_tensor(other))

    def __mul__(self, other):
        from . import ops

        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, ops.as_tensor(other))

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, ops.as_tensor(other))

    def __neg__(self):
        from . import ops

        return ops.scale(self, -1.0)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"


class Graph:
    """Ordered record of the operations reachable from a scalar output."""

    def __init__(self, output: Tensor):
        self.output = output
        self.nodes: List[Tensor] = self._topological_order(output)

    @staticmethod
    def _topological_order(output: Tensor) -> List[Tensor]:
        order: List[Tensor] = []
        visited = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """Populate `grad` on every reachable requires_grad tensor. A graph runs backward once."""
        output = self.output
        if output._backward_done:
            raise GraphReuseError(
                f"backward already ran on the graph rooted at {output!r}; rebuild it"
            )
        if output.size != 1:
            raise DimensionError(
                f"backward needs a scalar output, got shape {output.shape}"
            )
        if not output.requires_grad:
            raise InternalConsistencyError(
                "output does not depend on any requires_grad tensor"
            )

        pending = {id(output): np.ones_like(output.data)}
        for node in reversed(self.nodes):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            node.grad = grad if node.grad is None else node.grad + grad
            if node.backward_fn is None:
                continue
            for parent, parent_grad in zip(node.parents, node.backward_fn(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = (
                    parent_grad if key not in pending else pending[key] + parent_grad
                )
        output._backward_done = True
