import numpy as np
import pytest

from diffcast.denoiser import loss_and_grad
from diffcast.patching import PatchSpec

# the twelve window/padding/partition layouts of the ablation grid
GRID_LAYOUTS = [
    (16, 16, 16, 15, 1),
    (16, 16, 16, 14, 2),
    (16, 16, 16, 12, 4),
    (16, 16, 16, 8, 8),
    (25, 25, 32, 24, 1),
    (25, 25, 32, 23, 2),
    (25, 25, 32, 21, 4),
    (25, 25, 32, 17, 8),
    (25, 32, 32, 31, 1),
    (25, 32, 32, 30, 2),
    (25, 32, 32, 28, 4),
    (25, 32, 32, 24, 8),
]


def grid_specs() -> list[PatchSpec]:
    return [
        PatchSpec(window_rows=m, feature_count=f, image_side=s, cond_rows=c, target_rows=t)
        for f, m, s, c, t in GRID_LAYOUTS
    ]


def finite_difference_grads(params, x_t, mask, ts, noise, h=1e-4):
    """Independent central-difference oracle for loss_and_grad, parameter by
    parameter (64-bit)."""
    fd = {}
    for name, p in params.tensors.items():
        flat = p.reshape(-1)
        out = np.empty(flat.size, dtype=np.float64)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = loss_and_grad(params, x_t, mask, ts, noise)
            flat[i] = orig - h
            lm, _ = loss_and_grad(params, x_t, mask, ts, noise)
            flat[i] = orig
            out[i] = (lp - lm) / (2.0 * h)
        fd[name] = out.reshape(p.shape)
    return fd


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
