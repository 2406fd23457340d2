"""Benchmark the compiled kernel core against the pure-numpy fallback.

Times the lowering kernels in isolation, a full convolution forward +
backward, and one denoiser training step, and verifies that both backends
produce bit-identical results.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels, layers
from .denoiser import DenoiserConfig, init_params, loss_and_grad


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _conv_case(rng, batch, channels, side):
    x = rng.standard_normal((batch, channels, side, side), dtype=np.float32)
    w = rng.standard_normal((channels, channels, 3, 3), dtype=np.float32) * 0.1
    b = np.zeros(channels, dtype=np.float32)
    return x, w, b


def run_benchmark(repeats: int = 5, *, batch: int = 32, side: int = 16, channels: int = 32):
    """Returns (rows, identical) where rows are dicts with per-backend timings."""
    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    x, w, b = _conv_case(rng, batch, channels, side)
    cfg = DenoiserConfig(image_side=side, base_channels=16, depth=2, time_embed_dim=32, norm_groups=8)
    params = init_params(cfg, seed=1)
    xt = rng.standard_normal((batch, side, side), dtype=np.float32)
    noise = rng.standard_normal((batch, side, side), dtype=np.float32)
    mask = np.zeros((side, side), dtype=np.uint8)
    mask[side // 2 :, :] = 1
    ts = rng.integers(1, 51, size=batch)

    def conv_fwd_bwd():
        y, cols = layers.conv2d(x, w, b)
        layers.conv2d_backward(y, x.shape, w, cols)

    cases = {
        "im2col": lambda: kernels.im2col(x, 3),
        "col2im": lambda: kernels.col2im(kernels.im2col(x, 3), channels, side, side, 3),
        "conv2d fwd+bwd": conv_fwd_bwd,
        "denoiser step": lambda: loss_and_grad(params, xt, mask, ts, noise),
    }

    previous = kernels.active_backend()
    rows = []
    outputs = {}
    try:
        for name, fn in cases.items():
            row = {"case": name}
            for backend in backends:
                kernels.use_backend(backend)
                fn()  # warm up
                row[backend] = _best_of(fn, repeats)
                if name == "im2col":
                    outputs[backend] = kernels.im2col(x, 3)
            rows.append(row)
    finally:
        kernels.use_backend(previous)

    identical = True
    if len(outputs) == 2:
        a, b_ = outputs.values()
        identical = bool(np.array_equal(a, b_))
    return rows, identical


def format_table(rows, identical: bool) -> str:
    backends = [k for k in rows[0] if k != "case"]
    lines = []
    header = f"{'case':<18}" + "".join(f"{b + ' (ms)':>16}" for b in backends)
    if {"python", "compiled"} <= set(backends):
        header += f"{'speedup':>10}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in rows:
        line = f"{row['case']:<18}" + "".join(f"{row[b] * 1e3:>16.3f}" for b in backends)
        if {"python", "compiled"} <= set(backends):
            line += f"{row['python'] / row['compiled']:>10.2f}x"
        lines.append(line)
    if len(backends) < 2:
        lines.append("(compiled backend not built; showing python fallback only)")
    else:
        lines.append(f"backends bit-identical: {identical}")
    return "\n".join(lines)
