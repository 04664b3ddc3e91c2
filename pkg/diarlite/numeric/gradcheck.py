"""Finite-difference verification of analytic gradients."""

from typing import Callable, Sequence

import numpy as np

from diarlite.numeric.tensor import Graph, Tensor, backward, no_grad


def grad_check(
    f: Callable[..., Tensor],
    xs: Sequence[Tensor],
    eps: float = 1e-5,
) -> float:
    """Compare backward() against central differences.

    Args:
        f: Function of the tensors in ``xs`` returning a scalar tensor.
        xs: Inputs to differentiate with respect to; they are temporarily
            marked ``requires_grad`` and perturbed in place, then restored.
        eps: Finite-difference step.

    Returns:
        Max over all coordinates of
        ``|analytic - numeric| / max(1e-8, |analytic| + |numeric|)``.
    """
    saved_flags = [x.requires_grad for x in xs]
    saved_names = [x.name for x in xs]
    for i, x in enumerate(xs):
        x.requires_grad = True
        x.name = f"x{i}"
        # Perturbation below writes through a flat view.
        x.data = np.ascontiguousarray(x.data)
    try:
        with Graph() as graph:
            out = f(*xs)
        grads = backward(graph, out, xs)

        worst = 0.0
        for i, x in enumerate(xs):
            analytic = grads[f"x{i}"]
            flat = x.data.reshape(-1)
            analytic_flat = analytic.reshape(-1)
            for j in range(flat.size):
                original = flat[j]
                flat[j] = original + eps
                with no_grad():
                    plus = f(*xs).item()
                flat[j] = original - eps
                with no_grad():
                    minus = f(*xs).item()
                flat[j] = original
                numeric = (plus - minus) / (2.0 * eps)
                a = float(analytic_flat[j])
                denom = max(1e-8, abs(a) + abs(numeric))
                worst = max(worst, abs(a - numeric) / denom)
        return worst
    finally:
        for x, flag, name in zip(xs, saved_flags, saved_names):
            x.requires_grad = flag
            x.name = name
