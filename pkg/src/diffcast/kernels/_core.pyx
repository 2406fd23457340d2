# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution lowering kernels (im2col / col2im).

Drop-in replacements for the numpy fallback. The accumulation order in
col2im matches the fallback's kernel-offset order, so results are
bit-identical between backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"

ctypedef fused real:
    float
    double


def im2col(x, int k):
    x = np.ascontiguousarray(x)
    if x.dtype not in (np.float32, np.float64):
        raise TypeError(f"unsupported dtype {x.dtype}")
    return _im2col(x, k)


def col2im(cols, int c, int h, int w, int k):
    cols = np.ascontiguousarray(cols)
    if cols.dtype not in (np.float32, np.float64):
        raise TypeError(f"unsupported dtype {cols.dtype}")
    return _col2im(cols, c, h, w, k)


def _im2col(real[:, :, :, ::1] x, int k):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef int p = k // 2
    out_arr = np.zeros((n, c * k * k, h * w), dtype=np.asarray(x).dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, ci, di, dj, i, j, row, i0, i1, j0, j1
    with nogil:
        for b in range(n):
            for ci in range(c):
                for di in range(k):
                    i0 = p - di if p - di > 0 else 0
                    i1 = h + p - di if h + p - di < h else h
                    for dj in range(k):
                        j0 = p - dj if p - dj > 0 else 0
                        j1 = w + p - dj if w + p - dj < w else w
                        row = (ci * k + di) * k + dj
                        for i in range(i0, i1):
                            for j in range(j0, j1):
                                out[b, row, i * w + j] = x[b, ci, i + di - p, j + dj - p]
    return out_arr


def _col2im(real[:, :, ::1] cols, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w, int k):
    cdef Py_ssize_t n = cols.shape[0]
    cdef int p = k // 2
    out_arr = np.zeros((n, c, h, w), dtype=np.asarray(cols).dtype)
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, ci, di, dj, i, j, row, i0, i1, j0, j1
    with nogil:
        for b in range(n):
            for ci in range(c):
                for di in range(k):
                    i0 = p - di if p - di > 0 else 0
                    i1 = h + p - di if h + p - di < h else h
                    for dj in range(k):
                        j0 = p - dj if p - dj > 0 else 0
                        j1 = w + p - dj if w + p - dj < w else w
                        row = (ci * k + di) * k + dj
                        for i in range(i0, i1):
                            for j in range(j0, j1):
                                out[b, ci, i + di - p, j + dj - p] += cols[b, row, i * w + j]
    return out_arr
