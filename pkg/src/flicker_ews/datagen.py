"""Labelled synthetic training set built from random degree-7 drifts.

Layout of a dataset directory::

    manifest.txt                 key = value manifest (see ``DatasetManifest``)
    samples.csv                  per-sample metadata (index, label, seed, x0, sigma, p*, coefficients)
    flicker_L{n}.f32             label-1 samples, little-endian float32, shape (count, n, 2)
    nonflicker_L{n}.f32          label-0 samples, same layout
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kvtext
from .dynamics import PolyDrift, Schedule, critical_point, equilibria, simulate
from .errors import DataError, NoSaddleNodeError, SamplerExhausted, SimulationDiverged
from .features import ChannelPair, assemble_channels

log = logging.getLogger(__name__)

P0 = 5.0
DT = 0.01
SIGMA_FACTOR = 1.2
NATIVE_LENGTHS = (5000, 6000, 7000, 8000, 9000, 10000)
COEFFICIENT_RANGES = {
    "g": "U(-2, 0)",
    "f": "U(-|g|, |g|)",
    "e": "U(-2, 0)",
    "d": "U(-|e|, |e|)",
    "c": "U(-2, 0)",
    "b": "0",
    "a": "U(1, 3)",
}
CLASS_NAMES = {1: "flicker", 0: "nonflicker"}


def sample_coefficients(rng: np.random.Generator, p0: float = P0, max_tries: int = 100) -> PolyDrift:
    """Draw coefficients until the drift has a positive equilibrium at ``p0`` and a fold."""
    for _ in range(max_tries):
        g = rng.uniform(-2.0, 0.0)
        f = rng.uniform(-abs(g), abs(g))
        e = rng.uniform(-2.0, 0.0)
        d = rng.uniform(-abs(e), abs(e))
        c = rng.uniform(-2.0, 0.0)
        a = rng.uniform(1.0, 3.0)
        drift = PolyDrift(a=a, b=0.0, c=c, d=d, e=e, f=f, g=g, p=p0)
        try:
            critical_point(drift, p0)
        except NoSaddleNodeError:
            continue
        return drift
    raise SamplerExhausted(f"no valid coefficient set in {max_tries} draws")


def initial_state(drift: PolyDrift, p0: float = P0) -> float:
    roots = [r for r in equilibria(drift.with_control(p0)) if r > 0]
    if not roots:
        raise NoSaddleNodeError(f"no positive equilibrium at p={p0}")
    return roots[-1]


@dataclass
class LabeledSample:
    channels: ChannelPair
    label: int
    length: int
    gen_seed: int
    coeffs: PolyDrift
    x0: float = 0.0
    sigma: float = 0.0
    p_star: float = 0.0
    raw: np.ndarray | None = field(default=None, repr=False)
    schedule: Schedule | None = None


def make_sample(coeffs: PolyDrift, length: int, label: int, seed: int, var_window: int = 1000,
                p0: float = P0, dt: float = DT, max_seed_retries: int = 5) -> LabeledSample:
    """Simulate one labelled series of ``length`` values and assemble its channels.

    Label 1 ramps ``p`` linearly from ``p0`` to ``p*`` over the record; label 0
    holds ``p = p0``. Noise is constant at ``1.2 x0``.
    """
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    cp = critical_point(coeffs, p0)
    x0 = initial_state(coeffs, p0)
    sigma = SIGMA_FACTOR * x0
    sched = Schedule.ramp(p0, cp.p_star) if label == 1 else Schedule.constant(p0)
    last_err = None
    for attempt in range(max_seed_retries):
        sim_seed = seed if attempt == 0 else _retry_seed(seed, attempt)
        try:
            traj = simulate(coeffs.with_control(p0), sched, Schedule.constant(sigma), x0,
                            length - 1, dt, sim_seed)
        except SimulationDiverged as err:
            last_err = err
            continue
        return LabeledSample(
            channels=assemble_channels(traj.values, var_window), label=label, length=length,
            gen_seed=sim_seed, coeffs=coeffs, x0=x0, sigma=sigma, p_star=cp.p_star,
            raw=traj.values, schedule=sched,
        )
    raise SimulationDiverged(last_err.step) from last_err


def _retry_seed(seed: int, attempt: int) -> int:
    return int(np.random.SeedSequence([seed, attempt]).generate_state(1, np.uint32)[0])


@dataclass
class DatasetManifest:
    native_length: int
    count_per_class: int
    var_window: int = 1000
    base_seed: int = 0
    p0: float = P0
    dt: float = DT
    sigma_rule: str = "1.2*x0"
    coefficient_ranges: dict = field(default_factory=lambda: dict(COEFFICIENT_RANGES))

    def to_kv(self) -> dict:
        d = asdict(self)
        ranges = d.pop("coefficient_ranges")
        d = {"format": "flicker-ews-dataset", "version": 1, **d}
        d.update({f"range.{k}": v for k, v in ranges.items()})
        d["files.flicker"] = f"flicker_L{self.native_length}.f32"
        d["files.nonflicker"] = f"nonflicker_L{self.native_length}.f32"
        d["layout"] = "float32-le (count, length, 2) channels=raw,rollvar"
        return d

    @classmethod
    def from_kv(cls, kv: dict) -> "DatasetManifest":
        ranges = {k[len("range."):]: v for k, v in kv.items() if k.startswith("range.")}
        return cls(
            native_length=int(kv["native_length"]), count_per_class=int(kv["count_per_class"]),
            var_window=int(kv["var_window"]), base_seed=int(kv["base_seed"]), p0=float(kv["p0"]),
            dt=float(kv["dt"]), sigma_rule=kv["sigma_rule"], coefficient_ranges=ranges,
        )


def sample_seed(base_seed: int, index: int) -> int:
    return base_seed + index


def generate_indexed_sample(manifest: DatasetManifest, index: int, max_redraws: int = 20) -> LabeledSample:
    """Sample ``index``: labels 0 for the first half of indices, 1 for the second.

    Coefficients come from a stream keyed on ``(seed, 1)``; the noise uses ``seed``.
    A coefficient set whose simulation diverges is redrawn from the same stream.
    """
    seed = sample_seed(manifest.base_seed, index)
    label = 0 if index < manifest.count_per_class else 1
    coeff_rng = np.random.default_rng([seed, 1])
    for _ in range(max_redraws):
        coeffs = sample_coefficients(coeff_rng, manifest.p0)
        try:
            return make_sample(coeffs, manifest.native_length, label, seed, manifest.var_window,
                               manifest.p0, manifest.dt)
        except SimulationDiverged:
            log.debug("sample %d diverged; redrawing coefficients", index)
    raise SamplerExhausted(f"sample {index}: every coefficient redraw diverged")


def generate_samples(manifest: DatasetManifest, threads: int = 1) -> list[LabeledSample]:
    n = 2 * manifest.count_per_class
    if threads <= 1:
        return [generate_indexed_sample(manifest, i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: generate_indexed_sample(manifest, i), range(n)))


def build_dataset(manifest: DatasetManifest, out_dir, threads: int = 1, csv_export: bool = False) -> Path:
    """Generate and write a balanced dataset; deterministic for a fixed ``base_seed``."""
    if manifest.count_per_class < 1:
        raise ValueError("count_per_class must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples = generate_samples(manifest, threads)
    for label in (1, 0):
        block = np.stack([s.channels.stack(np.float32) for s in samples if s.label == label])
        block.astype("<f4").tofile(out / f"{CLASS_NAMES[label]}_L{manifest.native_length}.f32")
    with (out / "samples.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "label", "seed", "x0", "sigma", "p_star", *"abcdefg"])
        for i, s in enumerate(samples):
            writer.writerow([i, s.label, s.gen_seed, repr(s.x0), repr(s.sigma), repr(s.p_star),
                             *(repr(float(v)) for v in s.coeffs.coefficients)])
    if csv_export:
        export = out / "csv"
        export.mkdir(exist_ok=True)
        for i, s in enumerate(samples):
            np.savetxt(export / f"sample_{i:05d}_label{s.label}.csv", s.channels.stack(np.float64),
                       delimiter=",", header="raw,rollvar", comments="", fmt="%.9g")
    kvtext.write(out / "manifest.txt", manifest.to_kv())
    return out


def load_dataset(data_dir) -> tuple[np.ndarray, np.ndarray, DatasetManifest]:
    """Return ``(X, y, manifest)`` with ``X`` of shape ``(2N, L, 2)`` float32."""
    data_dir = Path(data_dir)
    try:
        manifest = DatasetManifest.from_kv(kvtext.read(data_dir / "manifest.txt"))
    except (OSError, KeyError) as err:
        raise DataError(f"cannot read dataset manifest in {data_dir}: {err}") from err
    n, length = manifest.count_per_class, manifest.native_length
    xs, ys = [], []
    for label in (0, 1):
        path = data_dir / f"{CLASS_NAMES[label]}_L{length}.f32"
        try:
            block = np.fromfile(path, dtype="<f4")
        except OSError as err:
            raise DataError(f"missing sample file {path}") from err
        if block.size != n * length * 2:
            raise DataError(f"{path} holds {block.size} floats, expected {n * length * 2}")
        xs.append(block.reshape(n, length, 2))
        ys.append(np.full(n, label, dtype=np.int64))
    return np.concatenate(xs).astype(np.float32), np.concatenate(ys), manifest
