"""RMSprop."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RmspropState:
    """Running average of squared gradients plus the step constants."""

    v: np.ndarray
    rho: float = 0.9
    lr: float = 1e-3
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw) -> "RmspropState":
        return cls(np.zeros_like(np.asarray(params, dtype=np.float64)), **kw)

    def apply(self, params: np.ndarray, grads: np.ndarray) -> None:
        """In-place update of ``params`` and the accumulator."""
        self.v *= self.rho
        self.v += (1.0 - self.rho) * grads * grads
        params -= self.lr * grads / np.sqrt(self.v + self.eps)


def rmsprop_step(params, grads, state: RmspropState):
    """One RMSprop step; returns ``(new_params, new_state)`` without mutating inputs.

    v <- rho * v + (1 - rho) * g**2
    p <- p - lr * g / sqrt(v + eps)
    """
    params = np.array(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.v.shape != params.shape:
        raise ValueError("params, grads and state shapes differ")
    new = RmspropState(state.v.copy(), state.rho, state.lr, state.eps)
    new.apply(params, grads)
    return params, new
