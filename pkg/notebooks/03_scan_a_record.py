"""
Scanning a record for flickering
================================

Slide the trained model over a long simulated record and print the flicker
probability trace alongside the two scalar scores. Run 02 first.
"""

from pathlib import Path

import numpy as np

from flicker_ews.detector import EnsembleSpec, dl_score, scan_series, variance_score
from flicker_ews.evaluation import ExperimentSpec, run_experiment
from flicker_ews.neuralnet import load_checkpoint

ckpt = load_checkpoint(Path("notebook_output") / "model.ckpt")

###############################################################################
# A tanh-system record ramped past its fold, and a null record for contrast.
records = {
    regime: run_experiment(ExperimentSpec("tanh", regime, steps=12500, replicates=1, base_seed=3))[0].values
    for regime in ("flickering", "null")
}

###############################################################################
# The same checkpoint scans two window widths; the traces are averaged.
spec = EnsembleSpec([ckpt, ckpt], (0.1, 0.16), raw_var_window=100)
for regime, x in records.items():
    trace = scan_series(x, spec)
    coarse = np.interp(np.linspace(trace.times[0], trace.times[-1], 8), trace.times, trace.p_flicker)
    print(f"{regime:>10}: p_flicker {np.round(coarse, 2)}")
    print(f"{'':>10}  dl score {dl_score(trace):.3f}  variance score {variance_score(x, 200):.3f}")
