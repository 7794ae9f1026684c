"""The CNN-LSTM flicker classifier with a flat parameter store."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import layers


@dataclass(frozen=True)
class NetworkConfig:
    """Layer hyperparameters. Defaults give the full-scale architecture."""

    input_length: int = 5000
    in_channels: int = 2
    kernel_size: int = 300
    conv_filters: tuple = (50, 100)
    lstm_units: tuple = (50, 10)
    dropout: float = 0.05
    n_classes: int = 2

    def layer_shapes(self) -> list[tuple[str, tuple]]:
        """Parameter names and shapes in storage order."""
        K, C = self.kernel_size, self.in_channels
        f1, f2 = self.conv_filters
        h1, h2 = self.lstm_units
        return [
            ("conv1.kernel", (K, C, f1)), ("conv1.bias", (f1,)),
            ("conv2.kernel", (K, f1, f2)), ("conv2.bias", (f2,)),
            ("lstm1.kernel", (f2, 4 * h1)), ("lstm1.recurrent", (h1, 4 * h1)), ("lstm1.bias", (4 * h1,)),
            ("lstm2.kernel", (h1, 4 * h2)), ("lstm2.recurrent", (h2, 4 * h2)), ("lstm2.bias", (4 * h2,)),
            ("dense.kernel", (h2, self.n_classes)), ("dense.bias", (self.n_classes,)),
        ]

    def parameter_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for name, shape in self.layer_shapes():
            layer = name.split(".")[0]
            counts[layer] = counts.get(layer, 0) + int(np.prod(shape))
        return counts

    def shape_chain(self) -> list[tuple]:
        """Per-sample shapes: input, conv1, conv2, pool, lstm1 sequence, lstm2 input width,
        lstm2 final state, class probabilities."""
        L = self.input_length
        f1, f2 = self.conv_filters
        h1, h2 = self.lstm_units
        return [(L, self.in_channels), (L, f1), (L, f2), (L // 2, f2), (L // 2, h1), (h1,), (h2,),
                (self.n_classes,)]

    def to_dict(self) -> dict:
        return asdict(self)


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class NetworkModel:
    """Parameters live in one flat array; ``self.params[name]`` are views into it."""

    def __init__(self, config: NetworkConfig, flat=None, dtype=np.float32):
        self.config = config
        self.shapes = config.layer_shapes()
        size = sum(int(np.prod(s)) for _, s in self.shapes)
        if flat is None:
            flat = np.zeros(size, dtype=dtype)
        elif flat.size != size:
            raise ValueError(f"parameter vector has {flat.size} entries, architecture needs {size}")
        self.flat = np.ascontiguousarray(flat)
        self.params = self.views(self.flat)

    @property
    def dtype(self):
        return self.flat.dtype

    @property
    def n_params(self) -> int:
        return self.flat.size

    def views(self, flat) -> dict[str, np.ndarray]:
        out, offset = {}, 0
        for name, shape in self.shapes:
            n = int(np.prod(shape))
            out[name] = flat[offset:offset + n].reshape(shape)
            offset += n
        return out

    @classmethod
    def initialize(cls, config: NetworkConfig, seed: int = 0, dtype=np.float32) -> "NetworkModel":
        """Glorot-uniform kernels, zero biases, LSTM forget-gate bias 1."""
        model = cls(config, dtype=dtype)
        rng = np.random.default_rng(seed)
        p = model.params
        K = config.kernel_size
        for name in ("conv1", "conv2"):
            _, cin, cout = p[f"{name}.kernel"].shape
            p[f"{name}.kernel"][...] = _glorot(rng, (K, cin, cout), K * cin, K * cout, dtype)
        for name in ("lstm1", "lstm2"):
            d, h4 = p[f"{name}.kernel"].shape
            h = h4 // 4
            p[f"{name}.kernel"][...] = _glorot(rng, (d, h4), d, h4, dtype)
            p[f"{name}.recurrent"][...] = _glorot(rng, (h, h4), h, h4, dtype)
            p[f"{name}.bias"][h:2 * h] = 1.0
        h2, nc = p["dense.kernel"].shape
        p["dense.kernel"][...] = _glorot(rng, (h2, nc), h2, nc, dtype)
        return model

    def copy(self) -> "NetworkModel":
        return NetworkModel(self.config, self.flat.copy())

    # -- forward / backward -------------------------------------------------

    def _check_input(self, x):
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[None]
        L, C = self.config.input_length, self.config.in_channels
        if x.shape[1:] != (L, C):
            raise ValueError(f"expected input of shape (batch, {L}, {C}), got {x.shape}")
        return x.astype(self.dtype, copy=False)

    def _forward(self, x, training, rng):
        p = self.params
        rate = self.config.dropout
        caches = {}
        a, caches["conv1"] = layers.conv1d_forward(x, p["conv1.kernel"], p["conv1.bias"])
        a, caches["conv2"] = layers.conv1d_forward(a, p["conv2.kernel"], p["conv2.bias"])
        a, caches["drop1"] = layers.dropout_forward(a, rate, training, rng)
        a, caches["pool"] = layers.maxpool_forward(a)
        a, caches["lstm1"] = layers.lstm_forward(a, p["lstm1.kernel"], p["lstm1.recurrent"], p["lstm1.bias"], True)
        a, caches["drop2"] = layers.dropout_forward(a, rate, training, rng)
        a, caches["lstm2"] = layers.lstm_forward(a, p["lstm2.kernel"], p["lstm2.recurrent"], p["lstm2.bias"], False)
        a, caches["drop3"] = layers.dropout_forward(a, rate, training, rng)
        logits, caches["dense"] = layers.dense_forward(a, p["dense.kernel"], p["dense.bias"])
        return logits, caches

    def forward(self, x, training: bool = False, rng=None, batch_size: int = 64) -> np.ndarray:
        """Class probabilities ``(p_nonflicker, p_flicker)`` per sample, float64.

        A single ``(L, 2)`` sample gives shape ``(2,)``; a batch gives ``(B, 2)``.
        """
        single = np.ndim(x) == 2
        x = self._check_input(x)
        if training and rng is None:
            raise ValueError("training-mode forward needs an rng for dropout")
        out = []
        for start in range(0, x.shape[0], batch_size):
            logits, _ = self._forward(x[start:start + batch_size], training, rng)
            out.append(layers.softmax(logits))
        probs = np.concatenate(out)
        return probs[0] if single else probs

    def trace_shapes(self, x) -> list[tuple]:
        """Run one inference pass and report the per-sample activation shapes."""
        x = self._check_input(x)[:1]
        p = self.params
        shapes = [x.shape[1:]]
        a, _ = layers.conv1d_forward(x, p["conv1.kernel"], p["conv1.bias"])
        shapes.append(a.shape[1:])
        a, _ = layers.conv1d_forward(a, p["conv2.kernel"], p["conv2.bias"])
        shapes.append(a.shape[1:])
        a, _ = layers.maxpool_forward(a)
        shapes.append(a.shape[1:])
        a, _ = layers.lstm_forward(a, p["lstm1.kernel"], p["lstm1.recurrent"], p["lstm1.bias"], True)
        shapes.append(a.shape[1:])
        # per-step feature width consumed by lstm2
        shapes.append(a.shape[-1:])
        a, _ = layers.lstm_forward(a, p["lstm2.kernel"], p["lstm2.recurrent"], p["lstm2.bias"], False)
        shapes.append(a.shape[1:])
        logits, _ = layers.dense_forward(a, p["dense.kernel"], p["dense.bias"])
        shapes.append(logits.shape[1:])
        return shapes

    def loss_and_grad(self, x, labels, rng=None, training: bool = True):
        """Mean sparse categorical cross-entropy and its gradient as a flat array.

        Dropout masks drawn in the forward pass are reused in the backward pass.
        """
        x = self._check_input(x)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (x.shape[0],) or np.any((labels < 0) | (labels >= self.config.n_classes)):
            raise ValueError("labels must be one class index per sample")
        if training and self.config.dropout > 0 and rng is None:
            raise ValueError("training with dropout needs an rng")
        logits, caches = self._forward(x, training, rng)
        probs = layers.softmax(logits)
        B = x.shape[0]
        rows = np.arange(B)
        loss = float(-np.mean(np.log(np.maximum(probs[rows, labels], 1e-12))))
        dlogits = probs.copy()
        dlogits[rows, labels] -= 1.0
        dlogits = (dlogits / B).astype(self.dtype)

        grad = np.zeros_like(self.flat)
        g = self.views(grad)
        da, g["dense.kernel"][...], g["dense.bias"][...] = layers.dense_backward(dlogits, caches["dense"])
        da = layers.dropout_backward(da, caches["drop3"])
        da, g["lstm2.kernel"][...], g["lstm2.recurrent"][...], g["lstm2.bias"][...] = \
            layers.lstm_backward(da, caches["lstm2"])
        da = layers.dropout_backward(da, caches["drop2"])
        da, g["lstm1.kernel"][...], g["lstm1.recurrent"][...], g["lstm1.bias"][...] = \
            layers.lstm_backward(da, caches["lstm1"])
        da = layers.maxpool_backward(da, caches["pool"])
        da = layers.dropout_backward(da, caches["drop1"])
        da, g["conv2.kernel"][...], g["conv2.bias"][...] = layers.conv1d_backward(da, caches["conv2"])
        _, g["conv1.kernel"][...], g["conv1.bias"][...] = layers.conv1d_backward(da, caches["conv1"])
        return loss, grad, probs
