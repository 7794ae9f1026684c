"""
Detector versus variance on a held-out system
=============================================

ROC curves for the model score and the variance score on replicates of the
hill system. Run 02 first.
"""

from pathlib import Path

from flicker_ews.detector import EnsembleSpec
from flicker_ews.evaluation import compare_detectors
from flicker_ews.neuralnet import load_checkpoint

ckpt = load_checkpoint(Path("notebook_output") / "model.ckpt")
ensemble = EnsembleSpec.single(ckpt, 0.16, raw_var_window=100)

###############################################################################
# 10 flickering and 10 null replicates of 6250 steps each.
cmp = compare_detectors("hill", 10, 10, ensemble, seed=0, steps=6250, var_window=100)
print(f"AUC model {cmp.roc_dl.auc:.3f}   AUC variance {cmp.roc_var.auc:.3f}")

###############################################################################
# A few points of each curve: alarm when the score is at least the threshold.
for name, roc in (("model", cmp.roc_dl), ("variance", cmp.roc_var)):
    step = max(1, len(roc.fpr) // 6)
    pts = ", ".join(f"({f:.2f}, {t:.2f})" for f, t in zip(roc.fpr[::step], roc.tpr[::step]))
    print(f"{name:>8} (fpr, tpr): {pts}")

cmp.write(Path("notebook_output") / "roc_hill")
