"""Checkpoint container: a plain-text header followed by a float32 weight payload.

File layout::

    flicker-ews-checkpoint
    format_version = 1
    arch.<field> = ...            NetworkConfig fields
    train.<field> = ...           TrainConfig echo
    data.<field> = ...            dataset facts needed at inference (e.g. var_window)
    best_epoch = <int>
    history.columns = epoch,loss,accuracy,val_loss,val_accuracy
    history.<epoch> = <row>
    payload.dtype = float32-le
    payload.count = <n>
    payload.order = name:shape,...   storage order of the flat parameter vector
    --end-header--
    <n little-endian float32 values>
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import kvtext
from ..errors import DataError
from .model import NetworkConfig, NetworkModel

MAGIC = "flicker-ews-checkpoint"
FORMAT_VERSION = 1
END_HEADER = b"\n--end-header--\n"


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    val_loss: float
    val_accuracy: float

    def row(self) -> list:
        return [self.epoch, self.loss, self.accuracy, self.val_loss, self.val_accuracy]


@dataclass
class Checkpoint:
    model: NetworkModel
    train_config: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    best_epoch: int = 0
    data: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def native_length(self) -> int:
        return self.model.config.input_length

    def header(self) -> dict:
        cfg = self.model.config
        items = {"format_version": self.format_version}
        items.update({f"arch.{k}": v for k, v in cfg.to_dict().items()})
        items.update({f"train.{k}": v for k, v in self.train_config.items()})
        items.update({f"data.{k}": v for k, v in self.data.items()})
        items["best_epoch"] = self.best_epoch
        items["history.columns"] = "epoch,loss,accuracy,val_loss,val_accuracy"
        for rec in self.history:
            items[f"history.{rec.epoch}"] = rec.row()
        items["payload.dtype"] = "float32-le"
        items["payload.count"] = self.model.n_params
        items["payload.order"] = ",".join(f"{n}:{'x'.join(map(str, s))}" for n, s in cfg.layer_shapes())
        return items

    def to_bytes(self) -> bytes:
        head = (MAGIC + "\n" + kvtext.dumps(self.header())).encode("utf-8").rstrip(b"\n")
        return head + END_HEADER + self.model.flat.astype("<f4").tobytes()

    def history_rows(self) -> list[list]:
        return [rec.row() for rec in self.history]


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    path = Path(path)
    path.write_bytes(ckpt.to_bytes())
    return path


def _tuple(text):
    return tuple(int(v) for v in text.split(","))


def checkpoint_from_bytes(blob: bytes, dtype=np.float32) -> Checkpoint:
    pos = blob.find(END_HEADER)
    if not blob.startswith(MAGIC.encode()) or pos < 0:
        raise DataError("not a flicker-ews checkpoint")
    kv = kvtext.loads(blob[len(MAGIC):pos].decode("utf-8"))
    version = int(kv["format_version"])
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format version {version}")
    config = NetworkConfig(
        input_length=int(kv["arch.input_length"]), in_channels=int(kv["arch.in_channels"]),
        kernel_size=int(kv["arch.kernel_size"]), conv_filters=_tuple(kv["arch.conv_filters"]),
        lstm_units=_tuple(kv["arch.lstm_units"]), dropout=float(kv["arch.dropout"]),
        n_classes=int(kv["arch.n_classes"]),
    )
    count = int(kv["payload.count"])
    payload = np.frombuffer(blob[pos + len(END_HEADER):], dtype="<f4")
    if payload.size != count:
        raise DataError(f"checkpoint payload holds {payload.size} floats, header says {count}")
    model = NetworkModel(config, payload.astype(dtype))
    history = []
    for key in sorted((k for k in kv if k.startswith("history.") and k != "history.columns"),
                      key=lambda k: int(k.split(".")[1])):
        epoch, loss, acc, vloss, vacc = kv[key].split(",")
        history.append(EpochRecord(int(epoch), float(loss), float(acc), float(vloss), float(vacc)))
    train_config = {k[6:]: kvtext.parse_scalar(v) for k, v in kv.items() if k.startswith("train.")}
    data = {k[5:]: kvtext.parse_scalar(v) for k, v in kv.items() if k.startswith("data.")}
    return Checkpoint(model=model, train_config=train_config, history=history,
                      best_epoch=int(kv.get("best_epoch", 0)), data=data, format_version=version)


def load_checkpoint(path, dtype=np.float32) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as err:
        raise DataError(f"cannot read checkpoint {path}: {err}") from err
    return checkpoint_from_bytes(blob, dtype)
