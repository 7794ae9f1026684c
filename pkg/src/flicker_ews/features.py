"""Rolling statistics, normalisation, resampling and two-channel assembly."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

ZERO_STD = 1e-12


@njit(cache=True)
def _window_moments(x, start, window):
    mean = 0.0
    for j in range(start, start + window):
        mean += x[j]
    mean /= window
    m2 = 0.0
    for j in range(start, start + window):
        d = x[j] - mean
        m2 += d * d
    return mean, m2


@njit(cache=True)
def _rolling_var(x, window):
    n = x.shape[0]
    out = np.empty(n)
    mean, m2 = _window_moments(x, 0, window)
    out[window - 1] = m2 / window
    for i in range(window, n):
        start = i - window + 1
        if (i - window + 1) % window == 0:
            # periodic exact recompute bounds drift of the running sums
            mean, m2 = _window_moments(x, start, window)
        else:
            new = x[i]
            old = x[i - window]
            new_mean = mean + (new - old) / window
            m2 += (new - old) * (new - new_mean + old - mean)
            mean = new_mean
            if m2 < 0.0:
                m2 = 0.0
        out[i] = m2 / window
    for i in range(window - 1):
        out[i] = out[window - 1]
    return out


def rolling_variance(x, window: int) -> np.ndarray:
    """Trailing population variance over ``window`` samples.

    Output ``i`` covers ``x[i-window+1 .. i]``; the first ``window-1`` entries
    are back-filled with the first full-window value so lengths match.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D series")
    if not 1 <= window <= x.size:
        raise ValueError(f"window {window} outside [1, {x.size}]")
    return _rolling_var(x, int(window))


def zscore(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ValueError("zscore needs at least two values")
    mean = x.mean()
    centred = x - mean
    std = np.sqrt(np.mean(centred * centred))
    if std < ZERO_STD:
        return np.zeros_like(x)
    return centred / std


def linear_resample(x, target_len: int) -> np.ndarray:
    """Sample the piecewise-linear interpolant of ``x`` at ``target_len`` even points."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2 or target_len < 2:
        raise ValueError("linear_resample needs len(x) >= 2 and target_len >= 2")
    if target_len == x.size:
        return x.copy()
    pos = np.linspace(0.0, x.size - 1, target_len)
    return np.interp(pos, np.arange(x.size), x)


@dataclass
class ChannelPair:
    raw: np.ndarray
    rollvar: np.ndarray

    @property
    def length(self) -> int:
        return self.raw.size

    def stack(self, dtype=np.float32) -> np.ndarray:
        """``(length, 2)`` array: raw signal then rolling variance."""
        return np.stack([self.raw, self.rollvar], axis=-1).astype(dtype)


def assemble_channels(x, var_window: int) -> ChannelPair:
    x = np.asarray(x, dtype=np.float64)
    if x.size < var_window:
        raise ValueError(f"series of length {x.size} shorter than variance window {var_window}")
    return ChannelPair(raw=zscore(x), rollvar=zscore(rolling_variance(x, var_window)))
