"""Adam on a flat parameter vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls(np.zeros(params.shape, np.float64), np.zeros(params.shape, np.float64))


def adam_step(params, grads, state: AdamState, t: int | None = None, lr=0.01, beta1=0.9,
              beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, applied to ``params`` in place.

    Moments are kept in float64 whatever the parameter dtype. ``t`` defaults to
    ``state.t + 1``.
    """
    t = state.t + 1 if t is None else t
    if t < 1:
        raise ValueError("Adam step count starts at 1")
    g = np.asarray(grads, dtype=np.float64)
    state.m *= beta1
    state.m += (1.0 - beta1) * g
    state.v *= beta2
    state.v += (1.0 - beta2) * (g * g)
    m_hat = state.m / (1.0 - beta1**t)
    v_hat = state.v / (1.0 - beta2**t)
    update = lr * m_hat / (np.sqrt(v_hat) + eps)
    params -= update.astype(params.dtype)
    state.t = t
    return params, state
