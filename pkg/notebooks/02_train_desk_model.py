"""
Training a small classifier
===========================

Generate a small balanced dataset from random degree-7 drifts and train a
reduced CNN-LSTM on it. Sizes are chosen to finish in a few minutes on one core.
"""

from pathlib import Path

import numpy as np

from flicker_ews.datagen import DatasetManifest, build_dataset, load_dataset
from flicker_ews.neuralnet import NetworkConfig, NetworkModel, TrainConfig, save_checkpoint, train

OUT = Path("notebook_output")

###############################################################################
# 100 series per class of length 500; the variance channel uses a 100-sample window.
manifest = DatasetManifest(native_length=500, count_per_class=100, var_window=100, base_seed=0)
build_dataset(manifest, OUT / "data")
x, y, _ = load_dataset(OUT / "data")
print("dataset", x.shape, "labels", np.bincount(y))

###############################################################################
# Kernel 25 instead of 300 so the receptive field is in proportion to the shorter input.
config = NetworkConfig(input_length=500, kernel_size=25)
model = NetworkModel.initialize(config, seed=0)
print("parameters per layer:", config.parameter_counts())

ckpt = train(model, x, y, TrainConfig(batch_size=32, max_epochs=5, shuffle_seed=0),
             callback=lambda r: print(f"epoch {r.epoch}: acc {r.accuracy:.3f} val_acc {r.val_accuracy:.3f}"))
ckpt.data = {"var_window": manifest.var_window}
path = save_checkpoint(ckpt, OUT / "model.ckpt")
print("best epoch", ckpt.best_epoch, "->", path)
