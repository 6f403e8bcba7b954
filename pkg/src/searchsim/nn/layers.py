"""Layer forward/backward pairs on NCHW arrays.

Each forward returns (output, cache); the matching backward consumes the
upstream gradient and the cache and returns input/parameter gradients.
Convolution is implemented as im2col + matmul so both directions reduce to
dense products.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(N, C, H, W) -> (N*H*W, C*k*k) patches of a zero-padded same conv."""
    n, c, h, w = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))  # (n, c, h, w, k, k)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * k * k)
    return np.ascontiguousarray(cols)


def _col2im(dcols: np.ndarray, x_shape, k: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add patch gradients back to the input."""
    n, c, h, w = x_shape
    pad = k // 2
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    d6 = dcols.reshape(n, h, w, c, k, k)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + h, j:j + w] += d6[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dxp[:, :, pad:pad + h, pad:pad + w]


def conv2d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    """Same-padded stride-1 cross-correlation; weights are (Cout, Cin, k, k)."""
    n, c, h, w = x.shape
    cout, cin, k, k2 = weights.shape
    if k != k2 or k % 2 == 0:
        raise ValueError("conv kernels must be square with odd size")
    if cin != c:
        raise ValueError(f"input has {c} channels but filters expect {cin}")
    cols = _im2col(x, k)
    out = cols @ weights.reshape(cout, -1).T + bias
    out = out.reshape(n, h, w, cout).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (cols, x.shape, weights.shape)


def conv2d_backward(dout: np.ndarray, cache, weights: np.ndarray):
    cols, x_shape, w_shape = cache
    n, c, h, w = x_shape
    cout = w_shape[0]
    k = w_shape[2]
    dmat = dout.transpose(0, 2, 3, 1).reshape(n * h * w, cout)
    dw = (dmat.T @ cols).reshape(w_shape)
    db = dmat.sum(axis=0)
    dcols = dmat @ weights.reshape(cout, -1)
    dx = _col2im(dcols, x_shape, k)
    return dx, dw, db


def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      running_mean: np.ndarray, running_var: np.ndarray,
                      train: bool, eps: float = 1e-5):
    """Per-channel normalization over (batch, spatial); pure in both modes.

    Train mode normalizes with batch statistics and reports them in the cache
    (the caller owns the running-stat update); infer mode uses running stats.
    """
    if train:
        if x.shape[0] < 2:
            raise ValueError("train-mode batch normalization requires batch size >= 2")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    cache = (xhat, inv_std, gamma, train, mean, var)
    return out, cache


def batchnorm_backward(dout: np.ndarray, cache):
    xhat, inv_std, gamma, train, _, _ = cache
    dgamma = np.sum(dout * xhat, axis=(0, 2, 3))
    dbeta = np.sum(dout, axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    if train:
        m = dout.shape[0] * dout.shape[2] * dout.shape[3]
        dx = (inv_std[None, :, None, None] / m) * (
            m * dxhat
            - np.sum(dxhat, axis=(0, 2, 3))[None, :, None, None]
            - xhat * np.sum(dxhat * xhat, axis=(0, 2, 3))[None, :, None, None]
        )
    else:
        dx = dxhat * inv_std[None, :, None, None]
    return dx, dgamma, dbeta


def leaky_relu_forward(x: np.ndarray, slope: float = 0.01):
    out = np.where(x > 0, x, slope * x)
    return out, (x > 0, slope)


def leaky_relu_backward(dout: np.ndarray, cache):
    positive, slope = cache
    return np.where(positive, dout, slope * dout)


def maxpool2_forward(x: np.ndarray):
    """2x2 stride-2 max pooling; spatial dims must be even."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError("max pooling requires even spatial dimensions")
    windows = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = windows.reshape(n, c, h // 2, w // 2, 4)
    idx = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), (idx, x.shape)


def maxpool2_backward(dout: np.ndarray, cache):
    idx, x_shape = cache
    n, c, h, w = x_shape
    dflat = np.zeros((n, c, h // 2, w // 2, 4), dtype=dout.dtype)
    np.put_along_axis(dflat, idx[..., None], dout[..., None], axis=-1)
    dwindows = dflat.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dwindows.reshape(n, c, h, w)


def dropout_forward(x: np.ndarray, p: float, train: bool,
                    rng: np.random.Generator | None = None):
    """Inverted dropout: identity at inference, 1/(1-p)-scaled mask in training."""
    if not train or p <= 0.0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(dout: np.ndarray, mask):
    return dout if mask is None else dout * mask


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    """(N, D) @ (M, D)^T + (M,)."""
    return x @ weights.T + bias, x


def dense_backward(dout: np.ndarray, x: np.ndarray, weights: np.ndarray):
    dw = dout.T @ x
    db = dout.sum(axis=0)
    dx = dout @ weights
    return dx, dw, db


def sigmoid_forward(x: np.ndarray):
    out = 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))
    return out, out


def sigmoid_backward(dout: np.ndarray, out: np.ndarray):
    return dout * out * (1.0 - out)
