"""Minibatch training with Adam, early stopping and best-validation checkpointing."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

import numpy as np

from .checkpoint import Checkpoint, EpochRecord
from .model import NetworkModel
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "sparse_categorical_crossentropy"
    batch_size: int = 32
    max_epochs: int = 5
    patience: int = 2
    val_fraction: float = 0.2
    shuffle_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie strictly between 0 and 1")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be positive")
        if self.loss != "sparse_categorical_crossentropy":
            raise ValueError(f"unsupported loss {self.loss!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def stratified_split(labels, val_fraction, rng):
    """Per-class random split; returns ``(train_idx, val_idx)``."""
    train, val = [], []
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        n_val = min(len(idx) - 1, max(1, int(round(val_fraction * len(idx)))))
        val.append(idx[:n_val])
        train.append(idx[n_val:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def evaluate(model: NetworkModel, x, y, batch_size=64):
    """Inference-mode ``(loss, accuracy)``."""
    probs = model.forward(x, training=False, batch_size=batch_size)
    p_true = np.maximum(probs[np.arange(len(y)), y], 1e-12)
    return float(-np.mean(np.log(p_true))), float(np.mean(probs.argmax(axis=1) == y))


def train(model: NetworkModel, x, y, config: TrainConfig = TrainConfig(), callback=None) -> Checkpoint:
    """Train ``model`` in place and return a checkpoint of the best-validation weights.

    Early stopping fires after ``patience`` epochs without a strict improvement in
    validation accuracy. ``callback(record)`` is called after every epoch.
    """
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0 or len(np.unique(y)) < 2:
        raise ValueError("training needs a non-empty dataset containing both classes")
    rng = np.random.default_rng(config.shuffle_seed)
    dropout_rng = np.random.default_rng([config.shuffle_seed, 1])
    train_idx, val_idx = stratified_split(y, config.val_fraction, rng)
    if len(train_idx) < config.batch_size:
        raise ValueError(f"dataset too small for a batch: {len(train_idx)} training samples, "
                         f"batch size {config.batch_size}")
    state = AdamState.zeros_like(model.flat)
    history: list[EpochRecord] = []
    best_acc, best_flat, best_epoch, stale = -np.inf, model.flat.copy(), 0, 0
    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(train_idx)
        loss_sum, correct = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grad, probs = model.loss_and_grad(x[batch], y[batch], dropout_rng)
            adam_step(model.flat, grad, state, lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                      eps=config.eps)
            loss_sum += loss * len(batch)
            correct += int(np.sum(probs.argmax(axis=1) == y[batch]))
        val_loss, val_acc = evaluate(model, x[val_idx], y[val_idx])
        record = EpochRecord(epoch, loss_sum / len(order), correct / len(order), val_loss, val_acc)
        history.append(record)
        log.info("epoch %d: loss %.4f acc %.3f val_loss %.4f val_acc %.3f (%.1fs)", epoch, record.loss,
                 record.accuracy, val_loss, val_acc, time.perf_counter() - started)
        if callback is not None:
            callback(record)
        if val_acc > best_acc:
            best_acc, best_flat, best_epoch, stale = val_acc, model.flat.copy(), epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    best = NetworkModel(model.config, best_flat)
    return Checkpoint(model=best, train_config=config.to_dict(), history=history, best_epoch=best_epoch)
