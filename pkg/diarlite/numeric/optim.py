"""Adaptive-moment optimizer with linear warmup."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Set, Tuple

import numpy as np

from diarlite.errors import NumericError
from diarlite.numeric.tensor import Tensor


@dataclass
class AdamState:
    """First/second moment estimates per parameter and the step counter."""

    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.98),
    eps: float = 1e-9,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """Apply one bias-corrected Adam update.

    Parameters without a gradient entry are returned unchanged and their
    moments are left untouched.

    Args:
        params: Parameter name -> current values.
        grads: Parameter name -> gradient.
        state: Optimizer state from the previous step.
        lr: Learning rate for this step.
        betas: Exponential decay rates of the moment estimates.
        eps: Denominator floor.

    Returns:
        Tuple of (updated parameters, updated state). Inputs are not modified.

    Raises:
        NumericError: If a gradient's shape differs from its parameter's.
    """
    beta1, beta2 = betas
    step = state.step + 1
    new_state = AdamState(step=step, m=dict(state.m), v=dict(state.v))
    updated: Dict[str, np.ndarray] = {}
    correction1 = 1.0 - beta1**step
    correction2 = 1.0 - beta2**step
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            updated[name] = value
            continue
        if grad.shape != value.shape:
            raise NumericError(
                f"gradient shape {grad.shape} does not match "
                f"parameter '{name}' {value.shape}"
            )
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        delta = lr * m_hat / (np.sqrt(v_hat) + eps)
        updated[name] = (value - delta).astype(value.dtype)
        new_state.m[name] = m
        new_state.v[name] = v
    return updated, new_state


def warmup_lr(base_lr: float, step: int, warmup_steps: int) -> float:
    """Linear warmup to ``base_lr`` over ``warmup_steps``, constant afterwards."""
    if warmup_steps <= 0:
        return base_lr
    return base_lr * min(1.0, step / warmup_steps)


class Adam:
    """Stateful wrapper that updates named parameter tensors in place."""

    def __init__(
        self,
        named_params: Iterable[Tuple[str, Tensor]],
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.98),
        eps: float = 1e-9,
        warmup_steps: int = 500,
        trainable: Optional[Set[str]] = None,
    ) -> None:
        """Initialize the optimizer.

        Args:
            named_params: (name, tensor) pairs to optimize.
            lr: Peak learning rate.
            betas: Moment decay rates.
            eps: Denominator floor.
            warmup_steps: Linear warmup length; 0 disables warmup.
            trainable: If given, only these names are updated (freezing).
        """
        self.params: Dict[str, Tensor] = dict(named_params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.warmup_steps = warmup_steps
        self.trainable = trainable
        self.state = AdamState()

    @property
    def current_lr(self) -> float:
        """Learning rate the next step will use."""
        return warmup_lr(self.lr, self.state.step + 1, self.warmup_steps)

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        """Update parameters in place from a gradient mapping."""
        names = [
            name
            for name in self.params
            if self.trainable is None or name in self.trainable
        ]
        current = {name: self.params[name].data for name in names}
        selected = {name: grads[name] for name in names if name in grads}
        updated, self.state = adam_step(
            current, selected, self.state, self.current_lr, self.betas, self.eps
        )
        for name, value in updated.items():
            self.params[name].data = value
