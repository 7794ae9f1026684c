"""Drift families, Euler-Maruyama integration, equilibria and saddle-node points.

Every drift has the form ``u - x + h(x)`` where ``u`` is the control parameter
(``p`` for the degree-7 training family, ``b`` for the named test systems) and
``h`` is the nonlinearity. Equilibria therefore lie on the curve
``u(x) = x - h(x)`` and folds sit where ``h'(x) = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

import numpy as np
from numba import njit

from . import kvtext
from .errors import InvalidStateError, NoSaddleNodeError, SimulationDiverged

DEFAULT_INTERVAL = (-20.0, 20.0)
DEFAULT_GRID = 4001
OVERFLOW_BOUND = 1e6
ROOT_TOL = 1e-10

# numba kernel family codes
_POLY = 0
_CODES = {"cubic": 1, "exponential": 2, "tanh": 3, "hill": 4, "logistic": 5, "arctan": 6}
FAMILIES = tuple(_CODES)
_FIXED_PARAMS = {"cubic": ("D",)}
_DEFAULT_FIXED = {"cubic": {"D": 1.5}}


@dataclass(frozen=True)
class PolyDrift:
    """``p - x + a x + b x^2 + ... + g x^7``."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    e: float = 0.0
    f: float = 0.0
    g: float = 0.0
    p: float = 0.0

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e, self.f, self.g], dtype=float)

    @property
    def control(self) -> float:
        return self.p

    def with_control(self, value: float) -> "PolyDrift":
        return replace(self, p=float(value))

    def nonlinearity(self, x):
        a, b, c, d, e, f, g = self.coefficients
        return x * (a + x * (b + x * (c + x * (d + x * (e + x * (f + x * g))))))

    def nonlinearity_slope(self, x):
        a, b, c, d, e, f, g = self.coefficients
        return a + x * (2 * b + x * (3 * c + x * (4 * d + x * (5 * e + x * (6 * f + x * 7 * g)))))

    def rhs(self, x, control=None):
        u = self.p if control is None else control
        return u - x + self.nonlinearity(x)

    def kernel_spec(self):
        return _POLY, self.coefficients

    def describe(self) -> dict:
        return {"family": "poly7", **{k: getattr(self, k) for k in "abcdefgp"}}


@dataclass(frozen=True)
class NamedDrift:
    """One of the six held-out test systems, ``b - x + h(x)``."""

    family: str
    b: float = 0.0
    fixed_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in _CODES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        params = dict(_DEFAULT_FIXED.get(self.family, {}))
        params.update(self.fixed_params)
        expected = set(_FIXED_PARAMS.get(self.family, ()))
        if set(params) != expected:
            raise ValueError(f"{self.family} takes fixed parameters {sorted(expected)}, got {sorted(params)}")
        object.__setattr__(self, "fixed_params", params)

    @property
    def control(self) -> float:
        return self.b

    def with_control(self, value: float) -> "NamedDrift":
        return NamedDrift(self.family, float(value), dict(self.fixed_params))

    def nonlinearity(self, x):
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam == "cubic":
            out = self.fixed_params["D"] * x - x**3
        elif fam == "exponential":
            out = 2.0 * (1.0 - np.exp(-2.0 * x**2))
        elif fam == "tanh":
            out = 2.0 * np.tanh(x)
        elif fam == "hill":
            x6 = x**6
            out = 1.5 * x6 / (1.0 + x6)
        elif fam == "logistic":
            out = 0.5 * (1.0 + np.tanh(5.0 * x))
        else:
            out = np.arctan(10.0 * x)
        return out[()] if out.ndim == 0 else out

    def nonlinearity_slope(self, x):
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam == "cubic":
            out = self.fixed_params["D"] - 3.0 * x**2
        elif fam == "exponential":
            out = 8.0 * x * np.exp(-2.0 * x**2)
        elif fam == "tanh":
            out = 2.0 / np.cosh(x) ** 2
        elif fam == "hill":
            out = 9.0 * x**5 / (1.0 + x**6) ** 2
        elif fam == "logistic":
            s = 0.5 * (1.0 + np.tanh(5.0 * x))
            out = 10.0 * s * (1.0 - s)
        else:
            out = 10.0 / (1.0 + 100.0 * x**2)
        return out[()] if out.ndim == 0 else out

    def rhs(self, x, control=None):
        u = self.b if control is None else control
        return u - x + self.nonlinearity(x)

    def kernel_spec(self):
        params = np.array([self.fixed_params.get("D", 0.0)], dtype=float)
        return _CODES[self.family], params

    def describe(self) -> dict:
        return {"family": self.family, "b": self.b, **self.fixed_params}


Drift = Union[PolyDrift, NamedDrift]


def eval_drift(drift: Drift, x):
    """Deterministic part of dx/dt at state ``x``."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidStateError(f"non-finite state {x!r}")
    return drift.rhs(x)


@dataclass(frozen=True)
class Schedule:
    """Time profile of a control parameter or noise amplitude over ``[0, T]``."""

    kind: str
    start: float
    end: float | None = None
    peak: float | None = None
    window: tuple = (0.0, 1.0)

    @classmethod
    def constant(cls, value):
        return cls("constant", float(value), end=float(value))

    @classmethod
    def ramp(cls, start, end):
        return cls("linearRamp", float(start), end=float(end))

    @classmethod
    def bump(cls, base, peak, window=(1.0 / 3.0, 2.0 / 3.0)):
        lo, hi = window
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"bad bump window {window}")
        return cls("triangularBump", float(base), end=float(base), peak=float(peak), window=(float(lo), float(hi)))

    def __post_init__(self):
        if self.kind not in ("constant", "linearRamp", "triangularBump"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @property
    def final_value(self) -> float:
        return self.start if self.kind != "linearRamp" else self.end

    def values(self, t, total):
        """Evaluate at times ``t`` (array) for a record of duration ``total``."""
        t = np.asarray(t, dtype=float)
        s = t / total
        if self.kind == "constant":
            return np.full_like(s, self.start)
        if self.kind == "linearRamp":
            # written so that s == 1 yields exactly ``end``
            return self.start * (1.0 - s) + self.end * s
        lo, hi = self.window
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        rise = np.clip(1.0 - np.abs(s - mid) / half, 0.0, None)
        return self.start + (self.peak - self.start) * rise

    def describe(self) -> dict:
        d = {"kind": self.kind, "start": self.start}
        if self.kind == "linearRamp":
            d["end"] = self.end
        if self.kind == "triangularBump":
            d["peak"] = self.peak
            d["window"] = self.window
        return d


@dataclass
class Trajectory:
    values: np.ndarray
    dt: float
    seed: int
    drift_meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    def metadata(self) -> dict:
        return {"dt": self.dt, "seed": self.seed, "length": len(self.values), **self.drift_meta}

    def to_csv(self, path) -> None:
        """Write ``t,x`` rows plus a ``.meta`` key-value sidecar next to ``path``."""
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write("t,x\n")
            for n, x in enumerate(self.values):
                fh.write(f"{n * self.dt!r},{float(x)!r}\n")
        kvtext.write(path.with_suffix(path.suffix + ".meta"), self.metadata())


@njit(cache=True)
def _kernel_rhs(code, params, x, u):
    if code == 0:
        h = x * (params[0] + x * (params[1] + x * (params[2] + x * (params[3]
                 + x * (params[4] + x * (params[5] + x * params[6]))))))
    elif code == 1:
        h = params[0] * x - x * x * x
    elif code == 2:
        h = 2.0 * (1.0 - math.exp(-2.0 * x * x))
    elif code == 3:
        h = 2.0 * math.tanh(x)
    elif code == 4:
        x6 = x ** 6
        h = 1.5 * x6 / (1.0 + x6)
    elif code == 5:
        h = 0.5 * (1.0 + math.tanh(5.0 * x))
    else:
        h = math.atan(10.0 * x)
    return u - x + h


@njit(cache=True)
def _euler_maruyama(code, params, x0, controls, sigmas, noise, dt, bound):
    n = controls.shape[0]
    out = np.empty(n + 1)
    out[0] = x0
    sq = math.sqrt(dt)
    x = x0
    for i in range(n):
        x = x + _kernel_rhs(code, params, x, controls[i]) * dt + sigmas[i] * sq * noise[i]
        if not abs(x) <= bound:
            return out, i + 1
        out[i + 1] = x
    return out, -1


def simulate(drift: Drift, param_schedule: Schedule, noise_schedule: Schedule, x0: float,
             steps: int, dt: float, seed: int, overflow: float = OVERFLOW_BOUND) -> Trajectory:
    """Integrate ``dx = f(x; u(t)) dt + sigma(t) dW`` with Euler-Maruyama.

    Returns ``steps + 1`` values starting with ``x0``. Increment ``n`` uses the
    schedules evaluated at ``t_n = n dt``; the record spans ``T = steps dt``.
    Gaussian increments come from ``numpy.random.default_rng(seed)``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not math.isfinite(x0):
        raise InvalidStateError(f"non-finite initial state {x0!r}")
    total = steps * dt
    t = np.arange(steps) * dt
    controls = np.ascontiguousarray(param_schedule.values(t, total), dtype=float)
    sigmas = np.ascontiguousarray(noise_schedule.values(t, total), dtype=float)
    noise = np.random.default_rng(seed).standard_normal(steps)
    code, params = drift.kernel_spec()
    values, bad = _euler_maruyama(code, params, float(x0), controls, sigmas, noise, float(dt), float(overflow))
    if bad >= 0:
        raise SimulationDiverged(bad, bound=overflow)
    meta = {f"drift.{k}": v for k, v in drift.describe().items()}
    meta.update({f"control.{k}": v for k, v in param_schedule.describe().items()})
    meta.update({f"noise.{k}": v for k, v in noise_schedule.describe().items()})
    meta["x0"] = float(x0)
    return Trajectory(values=values, dt=float(dt), seed=int(seed), drift_meta=meta)


def _bisect_all(func, lo, hi, tol=ROOT_TOL):
    """Vectorised bisection of ``func`` over many brackets with sign change."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = func(lo)
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        fmid = func(mid)
        left = np.sign(fmid) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fmid, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _bracketed_roots(func, interval, grid_size, tol=ROOT_TOL):
    lo, hi = interval
    if not hi > lo:
        raise ValueError(f"degenerate interval {interval}")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    xs = np.linspace(lo, hi, grid_size)
    fs = func(xs)
    exact = xs[fs == 0.0]
    change = np.flatnonzero(fs[:-1] * fs[1:] < 0)
    refined = _bisect_all(func, xs[change], xs[change + 1], tol) if change.size else np.empty(0)
    return np.sort(np.concatenate([exact, refined]))


def equilibria(drift: Drift, interval=DEFAULT_INTERVAL, grid_size: int = DEFAULT_GRID) -> list[float]:
    """All sign-change-bracketed equilibria on ``interval``, ascending."""
    return [float(r) for r in _bracketed_roots(drift.rhs, interval, grid_size)]


@dataclass(frozen=True)
class CriticalPoint:
    x_star: float
    p_star: float
    y_star: float


def critical_point(drift: PolyDrift, p0: float = 5.0, interval=DEFAULT_INTERVAL,
                   grid_size: int = DEFAULT_GRID) -> CriticalPoint:
    """Fold of the upper branch that starts at the largest positive equilibrium for ``p0``.

    ``x*`` is the largest root of ``P'(x) = 1`` in ``(0, x0]``; ``p* = x* - P(x*)``.
    """
    roots = [r for r in equilibria(drift.with_control(p0), interval, grid_size) if r > 0]
    if not roots:
        raise NoSaddleNodeError(f"no saddle-node found: no positive equilibrium at p={p0}")
    x0 = roots[-1]

    def excess_slope(x):
        return drift.nonlinearity_slope(x) - 1.0

    cands = _bracketed_roots(excess_slope, (0.0, x0), grid_size)
    cands = cands[cands > 0]
    if cands.size == 0:
        raise NoSaddleNodeError("no saddle-node found: polynomial slope never reaches 1 below the initial root")
    x_star = float(cands[-1])
    p_star = float(x_star - drift.nonlinearity(x_star))
    return CriticalPoint(x_star=x_star, p_star=p_star, y_star=x_star - p_star)


def fold_points(drift: Drift, interval=DEFAULT_INTERVAL, grid_size: int = DEFAULT_GRID):
    """Stationary points of the equilibrium curve ``u(x) = x - h(x)``.

    Returns ``(x, u, kind)`` tuples with ``kind`` either ``"min"`` or ``"max"``.
    """
    def curve_slope(x):
        return 1.0 - drift.nonlinearity_slope(x)

    out = []
    for x in _bracketed_roots(curve_slope, interval, grid_size):
        left, right = curve_slope(x - 1e-6), curve_slope(x + 1e-6)
        kind = "min" if left < 0 < right else "max" if left > 0 > right else "flat"
        out.append((float(x), float(x - drift.nonlinearity(x)), kind))
    return out


def critical_control(drift: NamedDrift, interval=DEFAULT_INTERVAL, grid_size: int = DEFAULT_GRID) -> float:
    """Control value at which the upper equilibrium branch disappears.

    This is the local minimum of ``b(x) = x - h(x)`` with the largest ``x``,
    i.e. the fold met when ``b`` is ramped downwards from the upper branch.
    """
    minima = [f for f in fold_points(drift, interval, grid_size) if f[2] == "min"]
    if not minima:
        raise NoSaddleNodeError(f"no saddle-node found for family {getattr(drift, 'family', 'poly7')}")
    return minima[-1][1]
