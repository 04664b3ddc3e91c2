"""Dense-matrix and reverse-mode differentiation substrate."""

from diarlite.numeric.tensor import Graph, Tensor, backward, no_grad

__all__ = ["Graph", "Tensor", "backward", "no_grad"]
