"""Held-out-system experiments and the detector-versus-variance ROC comparison."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kvtext
from .detector import EnsembleSpec, conservative_score, scan_series, variance_score
from .dynamics import NamedDrift, Schedule, Trajectory, critical_control, equilibria, simulate


@dataclass(frozen=True)
class SystemSettings:
    sigma: float
    b_start: float
    b_end: float | None  # None: ramp just past the computed fold


SYSTEMS = {
    "cubic": SystemSettings(0.4, 0.5, None),
    "exponential": SystemSettings(0.45, 0.0, -1.0),
    "tanh": SystemSettings(0.9, 0.5, -1.0),
    "hill": SystemSettings(0.5, 1.0, -0.5),
    "logistic": SystemSettings(0.3, 0.0, -1.0),
    "arctan": SystemSettings(0.8, 0.5, -1.0),
}
REGIMES = ("flickering", "null")
NULL_SEED_OFFSET = 1_000_000


def ramp_end(family: str, b_start: float, margin: float = 0.05) -> float:
    """Fold value of ``b`` pushed ``margin`` of the start-to-fold span beyond the fold."""
    b_star = critical_control(NamedDrift(family))
    return b_star - margin * (b_start - b_star)


@dataclass
class ExperimentSpec:
    system: str
    regime: str = "flickering"
    steps: int = 62500
    dt: float = 0.01
    sigma_base: float | None = None
    b_start: float | None = None
    b_end: float | None = None
    bump_factor: float = 2.5
    bump_window: tuple = (1.0 / 3.0, 2.0 / 3.0)
    replicates: int = 50
    base_seed: int = 0

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        defaults = SYSTEMS[self.system]
        if self.sigma_base is None:
            self.sigma_base = defaults.sigma
        if self.b_start is None:
            self.b_start = defaults.b_start
        if self.b_end is None:
            self.b_end = defaults.b_end if defaults.b_end is not None else ramp_end(self.system, self.b_start)

    def schedules(self) -> tuple[Schedule, Schedule]:
        if self.regime == "flickering":
            return Schedule.ramp(self.b_start, self.b_end), Schedule.constant(self.sigma_base)
        return (Schedule.constant(self.b_start),
                Schedule.bump(self.sigma_base, self.bump_factor * self.sigma_base, self.bump_window))

    def initial_state(self) -> float:
        """Upper stable equilibrium at ``b_start``."""
        return equilibria(NamedDrift(self.system, self.b_start))[-1]

    def describe(self) -> dict:
        return {"system": self.system, "regime": self.regime, "steps": self.steps, "dt": self.dt,
                "sigma_base": self.sigma_base, "b_start": self.b_start, "b_end": self.b_end,
                "bump_factor": self.bump_factor, "bump_window": self.bump_window,
                "replicates": self.replicates, "base_seed": self.base_seed}


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[Trajectory]:
    """``spec.replicates`` records of ``spec.steps`` values; replicate ``i`` uses seed ``base_seed + i``."""
    drift = NamedDrift(spec.system, spec.b_start)
    control, noise = spec.schedules()
    x0 = spec.initial_state()

    def one(i):
        return simulate(drift, control, noise, x0, spec.steps - 1, spec.dt, spec.base_seed + i)

    if threads <= 1:
        return [one(i) for i in range(spec.replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(spec.replicates)))


@dataclass
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def to_csv(self, path) -> None:
        """``threshold,fpr,tpr`` rows followed by an ``auc=<value>`` summary line."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["threshold", "fpr", "tpr"])
            for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
                writer.writerow([kvtext.format_value(float(t)), repr(float(f)), repr(float(p))])
            fh.write(f"auc={self.auc!r}\n")


def roc_from_scores(pos_scores, neg_scores) -> RocCurve:
    """ROC for the rule "alarm if score >= tau", sweeping tau from +inf down to -inf.

    Tied scores share one threshold, so the trapezoid over a tie gives half credit.
    """
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one positive and one negative score")
    levels = np.unique(np.concatenate([pos, neg]))[::-1]
    thresholds = np.concatenate([[np.inf], levels, [-np.inf]])
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    tpr = (pos.size - np.searchsorted(pos_sorted, thresholds, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(neg_sorted, thresholds, side="left")) / neg.size
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds, fpr, tpr, auc)


@dataclass
class Comparison:
    system: str
    roc_dl: RocCurve
    roc_var: RocCurve
    scores: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.roc_dl.to_csv(out / f"roc_{self.system}_dl.csv")
        self.roc_var.to_csv(out / f"roc_{self.system}_var.csv")
        with (out / f"scores_{self.system}.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["regime", "replicate", "seed", "score_kind", "score"])
            for (regime, kind), rows in self.scores.items():
                for i, seed, s in rows:
                    writer.writerow([regime, i, seed, kind, repr(float(s))])
        kvtext.write(out / f"report_{self.system}.txt", self.report)


def compare_detectors(system: str, n_pos: int, n_neg: int, ensemble: EnsembleSpec, seed: int = 0,
                      steps: int = 62500, dt: float = 0.01, var_window: int = 1000,
                      var_pos: int | None = None, var_neg: int | None = None, threads: int = 1,
                      **spec_kw) -> Comparison:
    """ROC curves of the ensemble score and the variance score on one held-out system.

    The first ``n_pos``/``n_neg`` replicates are scored by the ensemble; the variance
    baseline uses ``var_pos``/``var_neg`` replicates (defaults: the same counts).
    Flickering replicates use seeds ``seed + i``; null replicates ``seed + 1e6 + i``.
    """
    var_pos = n_pos if var_pos is None else var_pos
    var_neg = n_neg if var_neg is None else var_neg
    if min(n_pos, n_neg, var_pos, var_neg) < 1:
        raise ValueError("replicate counts must be >= 1")
    specs = {
        "flickering": ExperimentSpec(system, "flickering", steps, dt, replicates=max(n_pos, var_pos),
                                     base_seed=seed, **spec_kw),
        "null": ExperimentSpec(system, "null", steps, dt, replicates=max(n_neg, var_neg),
                               base_seed=seed + NULL_SEED_OFFSET, **spec_kw),
    }
    counts = {"flickering": (n_pos, var_pos), "null": (n_neg, var_neg)}
    scores: dict = {}

    def dl_of(traj):
        return conservative_score(scan_series(traj.values, ensemble))

    for regime, spec in specs.items():
        trajs = run_experiment(spec, threads)
        n_dl, n_var = counts[regime]
        dl_trajs = trajs[:n_dl]
        if threads <= 1:
            dl = [dl_of(t) for t in dl_trajs]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                dl = list(pool.map(dl_of, dl_trajs))
        scores[(regime, "dl")] = [(i, t.seed, s) for i, (t, s) in enumerate(zip(dl_trajs, dl))]
        scores[(regime, "var")] = [(i, t.seed, variance_score(t.values, var_window))
                                   for i, t in enumerate(trajs[:n_var])]
    roc_dl = roc_from_scores([s for *_, s in scores[("flickering", "dl")]], [s for *_, s in scores[("null", "dl")]])
    roc_var = roc_from_scores([s for *_, s in scores[("flickering", "var")]], [s for *_, s in scores[("null", "var")]])
    report = {"system": system, "auc_dl": roc_dl.auc, "auc_var": roc_var.auc,
              "n_pos_dl": n_pos, "n_neg_dl": n_neg, "n_pos_var": var_pos, "n_neg_var": var_neg,
              "steps": steps, "dt": dt, "var_window": var_window, "seed": seed,
              "window_fractions": list(ensemble.window_fractions), "stride": ensemble.stride}
    for regime, spec in specs.items():
        report.update({f"{regime}.{k}": v for k, v in spec.describe().items() if k not in ("system", "regime")})
    return Comparison(system, roc_dl, roc_var, scores, report)
