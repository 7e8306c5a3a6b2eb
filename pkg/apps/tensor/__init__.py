"""
Dense tensors with reverse-mode automatic differentiation.
"""

from .autograd import Graph, Tensor
from .optim import Adam, AdamState, adam_step
from .parameters import ParameterSet

__all__ = ["Graph", "Tensor", "Adam", "AdamState", "adam_step", "ParameterSet"]
