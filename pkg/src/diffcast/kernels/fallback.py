"""Pure-numpy implementations of the convolution lowering kernels.

im2col/col2im move data between image layout (N, C, H, W) and column layout
(N, C*k*k, H*W) for stride-1 'same' convolution with zero padding k//2.
The loops run over the k*k kernel offsets only; each iteration is a
contiguous slab copy (or add), so the fallback stays vectorized.

col2im accumulates contributions in kernel-offset order. The compiled
backend uses the same per-cell accumulation order, so both backends
produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Lower (N, C, H, W) into columns (N, C*k*k, H*W) for an odd kernel k."""
    n, c, h, w = x.shape
    p = k // 2
    xp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=x.dtype)
    xp[:, :, p : p + h, p : p + w] = x
    cols = np.empty((n, c, k, k, h, w), dtype=x.dtype)
    for di in range(k):
        for dj in range(k):
            cols[:, :, di, dj] = xp[:, :, di : di + h, dj : dj + w]
    return cols.reshape(n, c * k * k, h * w)


def col2im(cols: np.ndarray, c: int, h: int, w: int, k: int) -> np.ndarray:
    """Adjoint of im2col: scatter-add columns back to (N, C, H, W)."""
    n = cols.shape[0]
    p = k // 2
    cols6 = cols.reshape(n, c, k, k, h, w)
    xp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=cols.dtype)
    for di in range(k):
        for dj in range(k):
            xp[:, :, di : di + h, dj : dj + w] += cols6[:, :, di, dj]
    if p == 0:
        return xp
    return xp[:, :, p : p + h, p : p + w].copy()
