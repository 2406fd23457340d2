"""Differentiable primitives with hand-derived exact backward passes.

All forwards return (output, cache); the matching backward consumes the
cache and returns input gradients plus parameter gradients. Convolutions
are stride-1 'same' with zero padding, lowered through the kernels
backend (im2col/col2im) and a BLAS matmul.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x (N,C,H,W), w (F,C,k,k) with odd k, b (F,). Returns y (N,F,H,W)."""
    n, c, h, wd = x.shape
    f, _, k, _ = w.shape
    cols = kernels.im2col(x, k)  # (N, C*k*k, H*W)
    y = np.matmul(w.reshape(f, -1), cols)
    y += b[:, None]
    return y.reshape(n, f, h, wd), cols


def conv2d_backward(dy: np.ndarray, x_shape, w: np.ndarray, cols: np.ndarray):
    n, c, h, wd = x_shape
    f, _, k, _ = w.shape
    dyf = np.ascontiguousarray(dy.reshape(n, f, h * wd))
    db = dyf.sum(axis=(0, 2))
    dw = np.matmul(dyf, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    dcols = np.matmul(w.reshape(f, -1).T, dyf)
    dx = kernels.col2im(dcols, c, h, wd, k)
    return dx, dw, db


def group_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, groups: int, eps: float = 1e-5):
    n, c, h, w = x.shape
    xg = x.reshape(n, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * invstd).reshape(n, c, h, w)
    y = xhat * gamma[:, None, None] + beta[:, None, None]
    return y, (xhat, invstd)


def group_norm_backward(dy: np.ndarray, gamma: np.ndarray, groups: int, cache):
    xhat, invstd = cache
    n, c, h, w = dy.shape
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = (dy * gamma[:, None, None]).reshape(n, groups, -1)
    xh = xhat.reshape(n, groups, -1)
    # dx = invstd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)), per group
    dx = (
        dxhat
        - dxhat.mean(axis=2, keepdims=True)
        - xh * (dxhat * xh).mean(axis=2, keepdims=True)
    ) * invstd
    return dx.reshape(n, c, h, w), dgamma, dbeta


def silu(x: np.ndarray):
    # sigmoid via tanh to avoid exp overflow in float32
    s = 0.5 * (np.tanh(0.5 * x) + 1.0)
    return x * s, (x, s)


def silu_backward(dy: np.ndarray, cache):
    x, s = cache
    return dy * s * (1.0 + x * (1.0 - s))


def avg_pool2(x: np.ndarray):
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def avg_pool2_backward(dy: np.ndarray):
    n, c, h, w = dy.shape
    out = np.empty((n, c, h, 2, w, 2), dtype=dy.dtype)
    out[...] = (0.25 * dy)[:, :, :, None, :, None]
    return out.reshape(n, c, 2 * h, 2 * w)


def upsample2(x: np.ndarray):
    n, c, h, w = x.shape
    out = np.empty((n, c, h, 2, w, 2), dtype=x.dtype)
    out[...] = x[:, :, :, None, :, None]
    return out.reshape(n, c, 2 * h, 2 * w)


def upsample2_backward(dy: np.ndarray):
    n, c, h, w = dy.shape
    return dy.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x (B, in), w (out, in), b (out,)."""
    return x @ w.T + b


def linear_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray):
    return dy @ w, dy.T @ x, dy.sum(axis=0)
