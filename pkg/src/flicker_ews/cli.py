"""``flicker-ews`` command line: generate, train, evaluate, detect, simulate.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Every command writes ``run.meta`` (resolved configuration) into its output directory.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

from . import __version__, kvtext
from .datagen import DatasetManifest, build_dataset, load_dataset
from .detector import DEFAULT_FRACTIONS, DEFAULT_STRIDE, EnsembleSpec, scan_series
from .dynamics import FAMILIES, PolyDrift, Schedule, critical_point, equilibria, simulate
from .errors import DataError, NumericalError
from .evaluation import SYSTEMS, Comparison, ExperimentSpec, compare_detectors, run_experiment
from .ingest import load_csv, regularize
from .neuralnet import NetworkConfig, NetworkModel, TrainConfig, load_checkpoint, save_checkpoint, train

log = logging.getLogger("flicker_ews")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _add_common(p, out_help):
    p.add_argument("--config", help="key = value file; its entries override command-line flags")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--out", required=True, help=out_help)


def _add_ensemble(p):
    p.add_argument("--ensemble", nargs="+", required=True,
                   help="checkpoint files or directories of *.ckpt; one checkpoint is reused for every fraction")
    p.add_argument("--fractions", type=_floats, default=None,
                   help=f"comma-separated window fractions (default {','.join(map(str, DEFAULT_FRACTIONS))})")
    p.add_argument("--stride", type=float, default=DEFAULT_STRIDE, help="window stride as a fraction of the window")
    p.add_argument("--raw-var-window", type=int, default=1000,
                   help="rolling-variance window in raw samples, rescaled per window")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flicker-ews", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a labelled synthetic training set")
    _add_common(g, "dataset directory")
    g.add_argument("--length", type=int, default=5000)
    g.add_argument("--per-class", type=int, default=2000)
    g.add_argument("--var-window", type=int, default=1000)
    g.add_argument("--csv-export", action="store_true", help="also write one CSV per sample")

    t = sub.add_parser("train", help="train a classifier on a generated dataset")
    _add_common(t, "output directory for model.ckpt and history.csv")
    t.add_argument("--data", required=True)
    t.add_argument("--kernel", type=int, default=300)
    t.add_argument("--filters", type=_ints, default=[50, 100])
    t.add_argument("--lstm", type=_ints, default=[50, 10])
    t.add_argument("--dropout", type=float, default=0.05)
    t.add_argument("--max-epochs", type=int, default=5)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--patience", type=int, default=2)
    t.add_argument("--val-fraction", type=float, default=0.2)
    t.add_argument("--resume", help="not supported")

    e = sub.add_parser("evaluate", help="ROC comparison of the ensemble against the variance baseline")
    _add_common(e, "output directory for ROC CSVs and reports")
    e.add_argument("--system", default="all", help=f"one of {', '.join(SYSTEMS)} or 'all'")
    e.add_argument("--replicates", type=int, default=50, help="replicates per class scored by the ensemble")
    e.add_argument("--var-replicates", type=int, default=None,
                   help="replicates per class for the variance baseline (default: --replicates)")
    e.add_argument("--steps", type=int, default=62500)
    e.add_argument("--dt", type=float, default=0.01)
    e.add_argument("--var-window", type=int, default=1000)
    _add_ensemble(e)

    d = sub.add_parser("detect", help="probability trace for an empirical record")
    _add_common(d, "output trace CSV")
    d.add_argument("--input", required=True)
    d.add_argument("--time-col", required=True)
    d.add_argument("--value-col", required=True)
    d.add_argument("--age-axis", choices=("auto", "yes", "no"), default="auto")
    d.add_argument("--datetime", action="store_true", help="time column holds dates")
    d.add_argument("--target-len", type=int, default=100_000)
    _add_ensemble(d)

    s = sub.add_parser("simulate", help="export one raw trajectory")
    _add_common(s, "output CSV (t,x) with a .meta sidecar")
    s.add_argument("--system", required=True, help=f"poly7 or one of {', '.join(FAMILIES)}")
    s.add_argument("--regime", choices=("flickering", "null"), default="flickering")
    s.add_argument("--steps", type=int, default=62500, help="number of recorded values")
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--coeffs", type=_floats, help="poly7 only: a,b,c,d,e,f,g")
    s.add_argument("--p-start", type=float, default=5.0)
    s.add_argument("--p-end", type=float, default=None)
    s.add_argument("--sigma", type=float, default=None)
    return parser


def _apply_config(args, parser):
    if not getattr(args, "config", None):
        return args
    try:
        entries = kvtext.read(args.config)
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot read config {args.config}: {err}") from err
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    for key, text in entries.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            raise UsageError(f"config key {key!r} is not an option of '{args.command}'")
        action = actions[dest]
        if isinstance(action, argparse._StoreTrueAction):
            value = text.lower() in ("1", "true", "yes")
        elif action.nargs in ("+", "*"):
            value = [v.strip() for v in text.split(",")]
        else:
            value = action.type(text) if action.type else text
        setattr(args, dest, value)
    return args


def _write_meta(out_dir: Path, args, extra=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    items = {"artifact": f"flicker-ews {__version__}", "command": args.command}
    for key, value in sorted(vars(args).items()):
        if key in ("command", "config", "verbose") or value is None:
            continue
        items[f"arg.{key}"] = value
    items.update(extra or {})
    kvtext.write(out_dir / "run.meta", items)


def _check_positive(**values):
    for name, v in values.items():
        if v is not None and v < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")


def cmd_generate(args):
    _check_positive(length=args.length, per_class=args.per_class, var_window=args.var_window, threads=args.threads)
    if args.var_window > args.length:
        raise UsageError("--var-window exceeds --length")
    out = Path(args.out)
    manifest = DatasetManifest(native_length=args.length, count_per_class=args.per_class,
                               var_window=args.var_window, base_seed=args.seed)
    started = time.perf_counter()
    build_dataset(manifest, out, threads=args.threads, csv_export=args.csv_export)
    _write_meta(out, args)
    print(f"flicker: {args.per_class}  nonflicker: {args.per_class}  length: {args.length}  "
          f"({time.perf_counter() - started:.1f}s) -> {out}")
    return 0


def cmd_train(args):
    if args.resume:
        raise UsageError("resuming from a checkpoint is not supported")
    _check_positive(max_epochs=args.max_epochs, batch=args.batch, patience=args.patience)
    x, y, manifest = load_dataset(args.data)
    net = NetworkConfig(input_length=manifest.native_length, kernel_size=args.kernel,
                        conv_filters=tuple(args.filters), lstm_units=tuple(args.lstm), dropout=args.dropout)
    try:
        config = TrainConfig(lr=args.lr, batch_size=args.batch, max_epochs=args.max_epochs,
                             patience=args.patience, val_fraction=args.val_fraction, shuffle_seed=args.seed)
    except ValueError as err:
        raise UsageError(str(err)) from err
    model = NetworkModel.initialize(net, seed=args.seed)
    ckpt = train(model, x, y, config,
                 callback=lambda r: print(f"epoch {r.epoch}: loss {r.loss:.4f} acc {r.accuracy:.3f} "
                                          f"val_loss {r.val_loss:.4f} val_acc {r.val_accuracy:.3f}"))
    ckpt.data = {"var_window": manifest.var_window, "dataset_seed": manifest.base_seed,
                 "count_per_class": manifest.count_per_class}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, out / "model.ckpt")
    with (out / "history.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss", "accuracy", "val_loss", "val_accuracy"])
        writer.writerows([[r[0], *map(repr, r[1:])] for r in ckpt.history_rows()])
    _write_meta(out, args, {"best_epoch": ckpt.best_epoch, **{f"train.{k}": v for k, v in config.to_dict().items()}})
    print(f"best epoch {ckpt.best_epoch} -> {out / 'model.ckpt'}")
    return 0


def load_ensemble(paths, fractions=None, stride=DEFAULT_STRIDE, raw_var_window=1000) -> EnsembleSpec:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.ckpt")))
        else:
            files.append(p)
    if not files:
        raise DataError("no checkpoints found")
    ckpts = [load_checkpoint(f) for f in files]
    ckpts.sort(key=lambda c: c.native_length)
    if fractions is None:
        fractions = list(DEFAULT_FRACTIONS)
    fractions = sorted(fractions)
    if len(ckpts) == 1:
        ckpts = ckpts * len(fractions)
    if len(ckpts) != len(fractions):
        raise UsageError(f"{len(ckpts)} checkpoints cannot be paired with {len(fractions)} window fractions")
    try:
        return EnsembleSpec(ckpts, fractions, stride=stride, raw_var_window=raw_var_window)
    except ValueError as err:
        raise UsageError(str(err)) from err


def cmd_evaluate(args):
    _check_positive(replicates=args.replicates, var_replicates=args.var_replicates, threads=args.threads)
    systems = list(SYSTEMS) if args.system == "all" else [args.system]
    if any(s not in SYSTEMS for s in systems):
        raise UsageError(f"unknown system {args.system!r}")
    ensemble = load_ensemble(args.ensemble, args.fractions, args.stride, args.raw_var_window)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for system in systems:
        comp: Comparison = compare_detectors(system, args.replicates, args.replicates, ensemble, seed=args.seed,
                                             steps=args.steps, dt=args.dt, var_window=args.var_window,
                                             var_pos=args.var_replicates, var_neg=args.var_replicates,
                                             threads=args.threads)
        comp.write(out)
        summary.append((system, comp.roc_dl.auc, comp.roc_var.auc))
        print(f"{system}: auc_dl={comp.roc_dl.auc:.4f} auc_var={comp.roc_var.auc:.4f}")
    with (out / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["system", "auc_dl", "auc_var"])
        writer.writerows([[s, repr(a), repr(b)] for s, a, b in summary])
    _write_meta(out, args)
    return 0


def cmd_detect(args):
    age = {"auto": None, "yes": True, "no": False}[args.age_axis]
    series = load_csv(args.input, args.time_col, args.value_col, age_axis=age, datetime_axis=args.datetime)
    values = regularize(series, args.target_len)
    ensemble = load_ensemble(args.ensemble, args.fractions, args.stride, args.raw_var_window)
    trace = scan_series(values, ensemble)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out)
    _write_meta(out.parent, args, {"rows_dropped": series.dropped, "direction": series.direction,
                                   "input_points": series.values.size})
    print(f"{series.source_label}: {series.values.size} points ({series.dropped} dropped), "
          f"{trace.times.size} trace points -> {out}")
    return 0


def cmd_simulate(args):
    if args.steps < 2:
        raise UsageError("--steps must be >= 2")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.system == "poly7":
        if not args.coeffs or len(args.coeffs) != 7:
            raise UsageError("poly7 needs --coeffs a,b,c,d,e,f,g")
        drift = PolyDrift(*args.coeffs, p=args.p_start)
        roots = [r for r in equilibria(drift) if r > 0]
        if not roots:
            raise DataError("no positive equilibrium at --p-start")
        x0 = roots[-1]
        sigma = 1.2 * x0 if args.sigma is None else args.sigma
        if args.regime == "flickering":
            end = critical_point(drift, args.p_start).p_star if args.p_end is None else args.p_end
            control, noise = Schedule.ramp(args.p_start, end), Schedule.constant(sigma)
        else:
            control, noise = Schedule.constant(args.p_start), Schedule.bump(sigma, 2.5 * sigma)
        traj = simulate(drift, control, noise, x0, args.steps - 1, args.dt, args.seed)
    elif args.system in SYSTEMS:
        spec = ExperimentSpec(args.system, args.regime, args.steps, args.dt, sigma_base=args.sigma,
                              replicates=1, base_seed=args.seed)
        traj = run_experiment(spec)[0]
    else:
        raise UsageError(f"unknown system {args.system!r}")
    traj.to_csv(out)
    _write_meta(out.parent, args)
    print(f"{len(traj.values)} values -> {out}")
    return 0


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate,
            "detect": cmd_detect, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _apply_config(args, parser)
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
