"""Loading and regularising empirical records (body temperature, palaeo proxies)."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

log = logging.getLogger(__name__)

AGE_PATTERN = re.compile(r"(\bage\b|bp\b|kyr|ka\b)", re.IGNORECASE)


@dataclass
class EmpiricalSeries:
    """A record in forward physical time.

    For age axes (years before present) ``timestamps`` holds the negated age,
    so it increases from oldest to youngest and ``direction`` is ``timeReversed``.
    """

    timestamps: np.ndarray
    values: np.ndarray
    source_label: str = ""
    direction: str = "timeForward"
    dropped: int = 0

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.timestamps.shape != self.values.shape or self.values.size < 2:
            raise DataError("an empirical series needs matching timestamps and values, at least two of each")
        if np.any(np.diff(self.timestamps) <= 0):
            raise DataError("timestamps must be strictly increasing")

    @property
    def ages(self) -> np.ndarray:
        return -self.timestamps if self.direction == "timeReversed" else self.timestamps


def load_csv(path, time_column: str, value_column: str, *, age_axis: bool | None = None,
             datetime_axis: bool = False, delimiter: str | None = None) -> EmpiricalSeries:
    """Read two named columns from a delimited file with a header row.

    Rows whose value or time fails to parse are dropped and counted. Duplicate
    timestamps are averaged. ``age_axis=None`` treats the time column as an age
    (before present) when its name mentions age, BP, ka or kyr. ``datetime_axis``
    converts date strings to hours since the first record.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, sep=delimiter, engine="python", dtype=str, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise DataError(f"cannot parse {path}: {err}") from err
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in (time_column, value_column) if c not in frame.columns]
    if missing:
        raise DataError(f"{path.name}: missing column(s) {missing}; found {list(frame.columns)}")
    raw_time = frame[time_column].str.strip()
    values = pd.to_numeric(frame[value_column].str.strip(), errors="coerce")
    if datetime_axis:
        stamps = pd.to_datetime(raw_time, errors="coerce")
        times = (stamps - stamps.min()) / pd.Timedelta(hours=1)
    else:
        times = pd.to_numeric(raw_time, errors="coerce")
        if times.notna().sum() == 0 and raw_time.notna().any():
            raise DataError(f"{path.name}: time column {time_column!r} is not numeric")
    ok = times.notna() & values.notna() & np.isfinite(times.astype(float)) & np.isfinite(values.astype(float))
    dropped = int((~ok).sum())
    if dropped:
        log.info("%s: dropped %d unparseable or missing rows", path.name, dropped)
    t = times[ok].to_numpy(dtype=float)
    v = values[ok].to_numpy(dtype=float)
    if t.size < 2:
        raise DataError(f"{path.name}: fewer than two valid rows")
    if age_axis is None:
        age_axis = bool(AGE_PATTERN.search(time_column))
    direction = "timeReversed" if age_axis else "timeForward"
    if age_axis:
        t = -t
    uniq, inverse = np.unique(t, return_inverse=True)
    if uniq.size < 2:
        raise DataError(f"{path.name}: fewer than two distinct timestamps")
    sums = np.bincount(inverse, weights=v)
    counts = np.bincount(inverse)
    return EmpiricalSeries(uniq, sums / counts, source_label=path.stem, direction=direction, dropped=dropped)


def regularize(series: EmpiricalSeries, target_len: int = 100_000) -> np.ndarray:
    """Linear interpolation onto ``target_len`` evenly spaced times spanning the record."""
    if target_len < 2:
        raise ValueError("target_len must be >= 2")
    t = series.timestamps
    if target_len == t.size and np.allclose(np.diff(t), t[1] - t[0], rtol=1e-12, atol=0):
        return series.values.copy()
    grid = np.linspace(t[0], t[-1], target_len)
    return np.interp(grid, t, series.values)
