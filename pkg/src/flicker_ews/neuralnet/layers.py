"""Forward and backward kernels for the layers of the CNN-LSTM classifier.

All activations use a channels-last ``(batch, time, channels)`` layout.
Each ``*_forward`` returns its output and a cache consumed by ``*_backward``.
"""
from __future__ import annotations

import numpy as np

# upper bound on elements of one im2col block (per tap chunk)
_PATCH_BUDGET = 1 << 23


def same_padding(kernel_size: int) -> tuple[int, int]:
    """Left/right zero padding that keeps length; even kernels pad one more on the right."""
    left = (kernel_size - 1) // 2
    return left, kernel_size - 1 - left


def _correlate(x, w, pad_left):
    """Zero-padded cross-correlation with output length equal to input length.

    ``x``: (B, L, Cin), ``w``: (K, Cin, Cout). Output[t] uses x[t - pad_left + k].
    """
    B, L, C = x.shape
    K, Cin, Cout = w.shape
    if Cin != C:
        raise ValueError(f"channel mismatch: input has {C}, kernel expects {Cin}")
    pad_right = K - 1 - pad_left
    xp = np.pad(x, ((0, 0), (pad_left, pad_right), (0, 0)))
    chunk = max(1, min(K, _PATCH_BUDGET // max(1, B * L * C)))
    out = np.zeros((B * L, Cout), dtype=np.result_type(x, w))
    for k0 in range(0, K, chunk):
        k1 = min(K, k0 + chunk)
        patches = np.concatenate([xp[:, k:k + L, :] for k in range(k0, k1)], axis=2)
        out += patches.reshape(B * L, -1) @ w[k0:k1].reshape(-1, Cout)
    return out.reshape(B, L, Cout)


def conv1d_forward(x, w, b, relu=True):
    """'Same' 1-D convolution (cross-correlation) followed by ReLU."""
    left, _ = same_padding(w.shape[0])
    z = _correlate(x, w, left) + b
    y = np.maximum(z, 0) if relu else z
    return y, (x, w, y if relu else None)


def conv1d_backward(dy, cache):
    x, w, y = cache
    if y is not None:
        dy = dy * (y > 0)
    B, L, C = x.shape
    K, _, Cout = w.shape
    left, right = same_padding(K)
    db = dy.sum(axis=(0, 1), dtype=np.float64).astype(w.dtype)
    # input gradient is a correlation of dy with the flipped, transposed kernel
    dx = _correlate(dy, np.ascontiguousarray(w[::-1].transpose(0, 2, 1)), right)
    xp = np.pad(x, ((0, 0), (left, right), (0, 0)))
    dy2 = dy.reshape(B * L, Cout)
    dw = np.empty_like(w)
    chunk = max(1, min(K, _PATCH_BUDGET // max(1, B * L * C)))
    for k0 in range(0, K, chunk):
        k1 = min(K, k0 + chunk)
        patches = np.concatenate([xp[:, k:k + L, :] for k in range(k0, k1)], axis=2)
        dw[k0:k1] = (patches.reshape(B * L, -1).T @ dy2).reshape(k1 - k0, C, Cout)
    return dx, dw, db


def maxpool_forward(x):
    """Pool size 2, stride 2, valid padding; ties route to the earlier element."""
    B, L, C = x.shape
    if L < 2:
        raise ValueError("max-pool needs at least two time steps")
    half = L // 2
    pairs = x[:, : 2 * half].reshape(B, half, 2, C)
    second = pairs[:, :, 1, :] > pairs[:, :, 0, :]
    y = np.where(second, pairs[:, :, 1, :], pairs[:, :, 0, :])
    return y, (x.shape, second)


def maxpool_argmax(second):
    """Argmax indices into the unpooled time axis, per output position and channel."""
    half = second.shape[1]
    return 2 * np.arange(half)[None, :, None] + second.astype(np.int64)


def maxpool_backward(dy, cache):
    shape, second = cache
    B, L, C = shape
    half = L // 2
    dx = np.zeros(shape, dtype=dy.dtype)
    pairs = dx[:, : 2 * half].reshape(B, half, 2, C)
    pairs[:, :, 0, :] = np.where(second, 0, dy)
    pairs[:, :, 1, :] = np.where(second, dy, 0)
    return dx


def dropout_forward(x, rate, training, rng):
    """Inverted dropout. Returns the output and the scaling mask (``None`` when inactive)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not training or rate == 0.0:
        return x, None
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_forward(x, w, u, b, return_sequences):
    """Standard LSTM with gates ordered (input, forget, candidate, output).

    ``w``: (D, 4H) input kernel, ``u``: (H, 4H) recurrent kernel, ``b``: (4H,).
    """
    B, T, D = x.shape
    H = u.shape[0]
    dtype = np.result_type(x, w)
    z_in = (x.reshape(B * T, D) @ w + b).reshape(B, T, 4 * H)
    gates = np.empty((B, T, 4 * H), dtype=dtype)
    cells = np.empty((B, T + 1, H), dtype=dtype)
    hidden = np.empty((B, T + 1, H), dtype=dtype)
    cells[:, 0] = 0
    hidden[:, 0] = 0
    for t in range(T):
        z = z_in[:, t] + hidden[:, t] @ u
        g = gates[:, t]
        g[:, : 2 * H] = _sigmoid(z[:, : 2 * H])
        g[:, 2 * H: 3 * H] = np.tanh(z[:, 2 * H: 3 * H])
        g[:, 3 * H:] = _sigmoid(z[:, 3 * H:])
        cells[:, t + 1] = g[:, H: 2 * H] * cells[:, t] + g[:, :H] * g[:, 2 * H: 3 * H]
        hidden[:, t + 1] = g[:, 3 * H:] * np.tanh(cells[:, t + 1])
    y = hidden[:, 1:] if return_sequences else hidden[:, -1]
    return y, (x, w, u, gates, cells, hidden, return_sequences)


def lstm_backward(dy, cache):
    """Backpropagation through time; returns (dx, dw, du, db)."""
    x, w, u, gates, cells, hidden, return_sequences = cache
    B, T, D = x.shape
    H = u.shape[0]
    dz = np.empty_like(gates)
    dh_next = np.zeros((B, H), dtype=gates.dtype)
    dc_next = np.zeros((B, H), dtype=gates.dtype)
    ut = u.T
    for t in range(T - 1, -1, -1):
        if return_sequences:
            dh = dy[:, t] + dh_next
        else:
            dh = dh_next + dy if t == T - 1 else dh_next
        g = gates[:, t]
        i, f, c_hat, o = g[:, :H], g[:, H: 2 * H], g[:, 2 * H: 3 * H], g[:, 3 * H:]
        tc = np.tanh(cells[:, t + 1])
        dc = dh * o * (1.0 - tc * tc) + dc_next
        d = dz[:, t]
        d[:, :H] = dc * c_hat * i * (1.0 - i)
        d[:, H: 2 * H] = dc * cells[:, t] * f * (1.0 - f)
        d[:, 2 * H: 3 * H] = dc * i * (1.0 - c_hat * c_hat)
        d[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = d @ ut
    dz2 = dz.reshape(B * T, 4 * H)
    dw = x.reshape(B * T, D).T @ dz2
    du = hidden[:, :-1].reshape(B * T, H).T @ dz2
    db = dz2.sum(axis=0, dtype=np.float64).astype(w.dtype)
    dx = (dz2 @ w.T).reshape(B, T, D)
    return dx, dw, du, db


def dense_forward(x, w, b):
    return x @ w + b, (x, w)


def dense_backward(dy, cache):
    x, w = cache
    return dy @ w.T, x.T @ dy, dy.sum(axis=0, dtype=np.float64).astype(w.dtype)


def softmax(logits):
    """Row-wise softmax evaluated in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
