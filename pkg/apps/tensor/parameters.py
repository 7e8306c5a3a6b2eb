import copy
from collections import OrderedDict
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

import numpy as np

from main.utils.exceptions import DimensionError, InternalConsistencyError

from .autograd import Tensor


class ParameterSet:
    """
    # ParameterSet
    Ordered, named collection of leaf tensors.

    **Attributes**
    - frozen: names whose tensors never require grad and are skipped by the optimizer

    Subclasses add typed accessors and configuration; `with_arrays` keeps both.
    Values that already are tensors become the leaves as they are.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray], frozen: Iterable[str] = ()):
        self.frozen = frozenset(frozen)
        unknown = self.frozen - set(arrays)
        if unknown:
            raise InternalConsistencyError(f"frozen names not in parameter set: {sorted(unknown)}")
        self._tensors: "OrderedDict[str, Tensor]" = OrderedDict(
            (
                name,
                value
                if isinstance(value, Tensor)
                else Tensor(value, requires_grad=name not in self.frozen),
            )
            for name, value in arrays.items()
        )

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise InternalConsistencyError(f"missing parameter '{name}'") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> Tuple[str, ...]:
        return tuple(self._tensors)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._tensors.items())

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data for name, tensor in self._tensors.items()}

    def grads(self) -> Dict[str, np.ndarray]:
        """Gradients after backward; parameters the loss did not reach get zeros."""
        return {
            name: tensor.grad if tensor.grad is not None else np.zeros(tensor.shape)
            for name, tensor in self._tensors.items()
            if name not in self.frozen
        }

    def with_arrays(
        self, arrays: Mapping[str, np.ndarray], frozen: Optional[Iterable[str]] = None
    ) -> "ParameterSet":
        """Fresh leaves with new values; shapes must match the current ones."""
        for name, value in arrays.items():
            if name in self._tensors and np.shape(value) != self._tensors[name].shape:
                raise DimensionError(
                    f"parameter '{name}': shape {np.shape(value)} vs {self._tensors[name].shape}"
                )
        clone = copy.copy(self)
        merged = {**self.arrays(), **dict(arrays)}
        ParameterSet.__init__(clone, merged, self.frozen if frozen is None else frozen)
        return clone

    def freeze(self) -> "ParameterSet":
        return self.with_arrays({}, frozen=self.names())

    def num_values(self) -> int:
        return sum(tensor.size for tensor in self._tensors.values())

    def allclose(self, other: "ParameterSet", atol: float = 0.0) -> bool:
        if self.names() != other.names():
            return False
        return all(
            np.allclose(self[name].data, other[name].data, rtol=0.0, atol=atol)
            for name in self.names()
        )
