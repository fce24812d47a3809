"""Array-level forward/backward primitives for the layer kernel.

Everything operates on 4-d arrays laid out (batch, channel, height, width).
Convolutions are plain cross-correlations implemented with
``sliding_window_view`` + ``tensordot``; transposed convolution is built on
the same core via zero-stuffing so the adjoint identity holds by
construction. Output extents must divide exactly — fractional extents are a
configuration error, never silently floored.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, NumericError


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ConfigurationError(f"expected int or pair, got {v!r}")
        return int(v[0]), int(v[1])
    return int(v), int(v)


def check_finite(arr: np.ndarray, context: str) -> None:
    """Raise NumericError naming `context` if arr contains NaN/Inf."""
    if not np.isfinite(arr).all():
        bad = int(np.size(arr) - np.isfinite(arr).sum())
        raise NumericError(f"{bad} non-finite value(s) in {context}")


def conv_out_extent(size: int, k: int, s: int, p: int) -> int:
    num = size + 2 * p - k
    if num < 0:
        raise ConfigurationError(
            f"kernel {k} with padding {p} exceeds input extent {size}")
    if num % s != 0:
        raise ConfigurationError(
            f"conv extent ({size} + 2*{p} - {k}) not divisible by stride {s}")
    return num // s + 1


def _windows(x_pad: np.ndarray, kh: int, kw: int, sh: int, sw: int) -> np.ndarray:
    # (B, C, H', W', kh, kw) view, strided — no copy until the tensordot
    w = np.lib.stride_tricks.sliding_window_view(x_pad, (kh, kw), axis=(2, 3))
    return w[:, :, ::sh, ::sw]


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
                   stride=1, padding=0) -> np.ndarray:
    """Cross-correlation. x: (B,Ci,H,W), w: (Co,Ci,kh,kw), b: (Co,)."""
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if x.ndim != 4 or w.ndim != 4:
        raise ConfigurationError("conv2d expects 4-d input and weights")
    co, ci, kh, kw = w.shape
    if x.shape[1] != ci:
        raise ConfigurationError(
            f"conv2d channel mismatch: input has {x.shape[1]}, weights expect {ci}")
    ho = conv_out_extent(x.shape[2], kh, sh, ph)
    wo = conv_out_extent(x.shape[3], kw, sw, pw)
    if ho < 1 or wo < 1:
        raise ConfigurationError("conv2d output extent < 1")
    x_pad = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    win = _windows(x_pad, kh, kw, sh, sw)
    # contract (Ci, kh, kw) against weights -> (B, H', W', Co)
    y = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    if b is not None:
        y += b[None, :, None, None]
    return y


def conv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray,
                    stride=1, padding=0):
    """Gradients for conv2d_forward. Returns (dx, dw, db).

    Works per kernel offset in channels-last layout so each contribution is
    one GEMM plus a strided add — no window-tensor materialization.
    """
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    co, ci, kh, kw = w.shape
    x_pad = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    hp, wp = x_pad.shape[2], x_pad.shape[3]
    ho, wo = dy.shape[2], dy.shape[3]

    xt = np.ascontiguousarray(x_pad.transpose(0, 2, 3, 1))   # B,H,W,Ci
    dyt = np.ascontiguousarray(dy.transpose(0, 2, 3, 1))     # B,H',W',Co
    dyt_flat = dyt.reshape(-1, co)
    db = dyt_flat.sum(axis=0)
    dw = np.empty_like(w)
    dxt = np.zeros_like(xt)
    for a in range(kh):
        for c in range(kw):
            sl = xt[:, a:a + sh * ho:sh, c:c + sw * wo:sw, :]
            dw[:, :, a, c] = dyt_flat.T @ sl.reshape(-1, ci)
            dxt[:, a:a + sh * ho:sh, c:c + sw * wo:sw, :] += \
                (dyt_flat @ w[:, :, a, c]).reshape(dyt.shape[:3] + (ci,))
    dx_pad = dxt.transpose(0, 3, 1, 2)
    dx = dx_pad[:, :, ph:hp - ph, pw:wp - pw] if (ph or pw) else dx_pad
    return np.ascontiguousarray(dx), dw, db


def _stuff(x: np.ndarray, sh: int, sw: int) -> np.ndarray:
    if sh == 1 and sw == 1:
        return x
    b, c, h, w = x.shape
    out = np.zeros((b, c, sh * (h - 1) + 1, sw * (w - 1) + 1), dtype=x.dtype)
    out[:, :, ::sh, ::sw] = x
    return out


def _convT_as_conv(w: np.ndarray) -> np.ndarray:
    # (Ci, Co, kh, kw) -> equivalent stride-1 conv weights (Co, Ci, kh, kw),
    # spatially flipped
    return np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))


def conv_transpose2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
                             stride=1, padding=0) -> np.ndarray:
    """Adjoint of conv2d. x: (B,Ci,H,W), w: (Ci,Co,kh,kw).

    Output extent is s*(d-1) + k - 2p per axis.
    """
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    ci, co, kh, kw = w.shape
    if x.shape[1] != ci:
        raise ConfigurationError(
            f"conv_transpose2d channel mismatch: input has {x.shape[1]}, "
            f"weights expect {ci}")
    if ph > kh - 1 or pw > kw - 1:
        raise ConfigurationError("conv_transpose2d padding must be <= kernel-1")
    xs = _stuff(x, sh, sw)
    y = conv2d_forward(xs, _convT_as_conv(w), None,
                       stride=1, padding=(kh - 1 - ph, kw - 1 - pw))
    if b is not None:
        y += b[None, :, None, None]
    return y


def conv_transpose2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray,
                              stride=1, padding=0):
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    ci, co, kh, kw = w.shape
    xs = _stuff(x, sh, sw)
    dxs, dv, db = conv2d_backward(xs, _convT_as_conv(w), dy,
                                  stride=1, padding=(kh - 1 - ph, kw - 1 - pw))
    dx = dxs[:, :, ::sh, ::sw]
    dw = np.ascontiguousarray(dv[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return dx, dw, db


def leaky_relu_forward(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0, x, slope * x)


def leaky_relu_backward(x: np.ndarray, dy: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0, dy, slope * dy)


def sigmoid_forward(x: np.ndarray) -> np.ndarray:
    # split by sign to stay overflow-free in float32
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * y * (1.0 - y)


def tanh_forward(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (1.0 - y * y)


def instance_norm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                          eps: float = 1e-5):
    """Per-sample, per-channel normalization over the spatial axes."""
    mean = x.mean(axis=(2, 3), keepdims=True)
    var = x.var(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y, (xhat, inv)


def instance_norm_backward(dy: np.ndarray, gamma: np.ndarray, cache):
    xhat, inv = cache
    m = xhat.shape[2] * xhat.shape[3]
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gamma[None, :, None, None]
    # standard normalization backward, reductions over the spatial axes
    dx = inv / m * (m * dxhat
                    - dxhat.sum(axis=(2, 3), keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=(2, 3), keepdims=True))
    return dx, dgamma, dbeta


def global_avg_pool_forward(x: np.ndarray) -> np.ndarray:
    return x.mean(axis=(2, 3), keepdims=True)


def global_avg_pool_backward(x_shape, dy: np.ndarray) -> np.ndarray:
    m = x_shape[2] * x_shape[3]
    return np.broadcast_to(dy / m, x_shape).copy()


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Channel mixing: x (B,Ci,H,W), w (Co,Ci) -> (B,Co,H,W)."""
    if x.shape[1] != w.shape[1]:
        raise ConfigurationError(
            f"linear channel mismatch: input has {x.shape[1]}, weights expect "
            f"{w.shape[1]}")
    y = np.einsum("oi,bihw->bohw", w, x, optimize=True)
    return y + b[None, :, None, None]


def linear_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    dw = np.einsum("bohw,bihw->oi", dy, x, optimize=True)
    db = dy.sum(axis=(0, 2, 3))
    dx = np.einsum("oi,bohw->bihw", w, dy, optimize=True)
    return dx, dw, db


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of squared element-wise differences."""
    if pred.shape != target.shape:
        raise ConfigurationError(
            f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    d = pred.astype(np.float64) - target.astype(np.float64)
    return float(np.mean(d * d))


def mse_loss_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    if pred.shape != target.shape:
        raise ConfigurationError(
            f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    return (2.0 / pred.size) * (pred - target)
