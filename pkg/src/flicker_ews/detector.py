"""Sliding-window ensemble inference and the scalar detection scores."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .features import assemble_channels, linear_resample, rolling_variance
from .neuralnet.checkpoint import Checkpoint


# fractions of the series covered by the 5000..10000-sample models on a 62,500-step record,
# rounded (exact ratios are 8, 9.6, 11.2, 12.8, 14.4, 16 %)
DEFAULT_FRACTIONS = (0.08, 0.096, 0.11, 0.13, 0.14, 0.16)
DEFAULT_STRIDE = 0.1
RAW_VAR_WINDOW = 1000


@dataclass
class EnsembleSpec:
    """Checkpoints paired in order with the window fraction each one scans."""

    members: list
    window_fractions: Sequence[float] = DEFAULT_FRACTIONS
    stride: float = DEFAULT_STRIDE
    raw_var_window: int = RAW_VAR_WINDOW
    var_cap_fraction: float = 0.2

    def __post_init__(self):
        self.window_fractions = tuple(float(f) for f in self.window_fractions)
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        if len(self.members) != len(self.window_fractions):
            raise ValueError(f"{len(self.members)} members but {len(self.window_fractions)} window fractions")
        if not all(0.0 < f < 1.0 for f in self.window_fractions):
            raise ValueError("window fractions must lie in (0, 1)")
        if not 0.0 < self.stride <= 1.0:
            raise ValueError("stride must be a fraction of the window in (0, 1]")

    @classmethod
    def single(cls, checkpoint: Checkpoint, fraction: float, **kw) -> "EnsembleSpec":
        return cls([checkpoint], (fraction,), **kw)


@dataclass
class ProbabilityTrace:
    times: np.ndarray
    p_flicker: np.ndarray
    per_member: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times)
        self.p_flicker = np.asarray(self.p_flicker, dtype=float)
        if self.times.shape != self.p_flicker.shape:
            raise ValueError("times and p_flicker differ in length")

    @property
    def p_nonflicker(self) -> np.ndarray:
        return 1.0 - self.p_flicker

    def member_on_grid(self) -> list[np.ndarray]:
        return [np.interp(self.times, t, p) for t, p in self.per_member]

    def to_csv(self, path) -> None:
        """Columns ``index,p_flicker,p_nonflicker[,member_k...]``."""
        members = self.member_on_grid() if len(self.per_member) > 1 else []
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index", "p_flicker", "p_nonflicker", *(f"member_{k}" for k in range(len(members)))])
            for j, idx in enumerate(self.times):
                writer.writerow([int(idx), repr(float(self.p_flicker[j])), repr(float(self.p_nonflicker[j])),
                                 *(repr(float(m[j])) for m in members)])


def window_starts(n: int, width: int, stride: int) -> np.ndarray:
    """Window start offsets; the last window always ends at the final sample."""
    starts = list(range(0, n - width + 1, stride))
    if starts[-1] != n - width:
        starts.append(n - width)
    return np.asarray(starts)


def scaled_var_window(native_length: int, width: int, raw_var_window: int = RAW_VAR_WINDOW,
                      cap_fraction: float = 0.2) -> int:
    """Rolling-variance window in resampled samples covering ``raw_var_window`` raw samples."""
    scaled = int(round(raw_var_window * native_length / width))
    return max(2, min(scaled, int(native_length * cap_fraction)))


def window_inputs(series, width, native_length, stride_frac=DEFAULT_STRIDE, raw_var_window=RAW_VAR_WINDOW,
                  cap_fraction=0.2):
    """Stacked ``(n_windows, native_length, 2)`` inputs and the window-end indices."""
    series = np.asarray(series, dtype=float)
    stride = max(1, int(round(stride_frac * width)))
    starts = window_starts(series.size, width, stride)
    var_window = scaled_var_window(native_length, width, raw_var_window, cap_fraction)
    inputs = np.empty((starts.size, native_length, 2), dtype=np.float32)
    for j, s in enumerate(starts):
        segment = linear_resample(series[s:s + width], native_length)
        inputs[j] = assemble_channels(segment, var_window).stack(np.float32)
    return inputs, starts + width - 1


def member_trace(series, checkpoint: Checkpoint, fraction: float, stride: float = DEFAULT_STRIDE,
                 raw_var_window: int = RAW_VAR_WINDOW, cap_fraction: float = 0.2, batch_size: int = 64):
    """``(window_end_indices, p_flicker)`` for one model scanning windows of ``fraction * N`` samples."""
    n = len(series)
    width = int(np.floor(fraction * n))
    if width < 2 or width > n:
        raise DataError(f"series of length {n} too short for a {fraction:.3g} window")
    inputs, ends = window_inputs(series, width, checkpoint.native_length, stride, raw_var_window, cap_fraction)
    probs = checkpoint.model.forward(inputs, training=False, batch_size=batch_size)
    return ends, probs[:, 1]


def scan_series(series, spec: EnsembleSpec) -> ProbabilityTrace:
    """Ensemble flicker probability along ``series``.

    Each member slides its own window; member traces are linearly interpolated
    onto the union of all window-end indices and averaged.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or not np.all(np.isfinite(series)):
        raise DataError("series must be a finite 1-D sequence")
    largest = int(np.floor(max(spec.window_fractions) * series.size))
    if largest < 2 or series.size < largest:
        raise DataError(f"series of length {series.size} shorter than the largest window")
    members = [member_trace(series, ckpt, frac, spec.stride, spec.raw_var_window, spec.var_cap_fraction)
               for ckpt, frac in zip(spec.members, spec.window_fractions)]
    if len(members) == 1:
        ends, p = members[0]
        return ProbabilityTrace(ends, p, members)
    grid = np.unique(np.concatenate([m[0] for m in members]))
    mean = np.mean([np.interp(grid, t, p) for t, p in members], axis=0)
    return ProbabilityTrace(grid, mean, members)


def dl_score(trace) -> float:
    """Peak flicker probability above its own mean."""
    p = np.asarray(trace.p_flicker if isinstance(trace, ProbabilityTrace) else trace, dtype=float)
    if p.size == 0:
        raise ValueError("empty trace")
    return float(p.max() - p.mean())


def conservative_score(member_traces) -> float:
    """Weakest (minimum) ``dl_score`` across ensemble members."""
    if isinstance(member_traces, ProbabilityTrace):
        member_traces = [p for _, p in member_traces.per_member]
    scores = [dl_score(p[1] if isinstance(p, tuple) else p) for p in member_traces]
    if not scores:
        raise ValueError("need at least one member trace")
    return min(scores)


def variance_score(series, window: int = RAW_VAR_WINDOW) -> float:
    """``max V / (mean V + std V)`` of the trailing rolling variance of the raw series."""
    series = np.asarray(series, dtype=float)
    if series.size < window:
        raise DataError(f"series of length {series.size} shorter than variance window {window}")
    v = rolling_variance(series, window)[window - 1:]
    return ratio_score(v)


def ratio_score(v) -> float:
    v = np.asarray(v, dtype=float)
    denom = v.mean() + v.std()
    if not denom > 0.0:
        return 0.0
    return float(v.max() / denom)
