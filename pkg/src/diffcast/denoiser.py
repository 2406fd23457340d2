"""Noise-prediction U-Net over S x S single-channel images.

Input is two channels (noisy image + binary mask); conditioning stays clean
inside the image and the mask channel tells the network which region it is
asked to denoise. Each residual block receives the timestep embedding via a
learned linear projection added to its feature maps. The final convolution
is zero-initialized so an untrained network predicts zero noise.

Forward and backward passes are hand-written (see layers.py); gradients are
exact, which the finite-difference tests verify parameter by parameter.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from . import layers
from .errors import ConfigError


@dataclass(frozen=True)
class DenoiserConfig:
    image_side: int
    in_channels: int = 2
    base_channels: int = 32
    depth: int = 3
    time_embed_dim: int = 64
    norm_groups: int = 8

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if self.image_side % (1 << self.depth) != 0:
            raise ConfigError(
                f"image_side {self.image_side} must be divisible by 2^depth ({1 << self.depth})"
            )
        if self.base_channels % self.norm_groups != 0:
            raise ConfigError(
                f"base_channels {self.base_channels} must be divisible by "
                f"norm_groups {self.norm_groups}"
            )
        if self.time_embed_dim % 2 != 0:
            raise ConfigError("time_embed_dim must be even")

    @property
    def level_channels(self) -> list[int]:
        return [self.base_channels * (1 << l) for l in range(self.depth)]

    def to_dict(self) -> dict:
        return {
            "image_side": self.image_side,
            "in_channels": self.in_channels,
            "base_channels": self.base_channels,
            "depth": self.depth,
            "time_embed_dim": self.time_embed_dim,
            "norm_groups": self.norm_groups,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserConfig":
        return cls(**{k: int(v) for k, v in d.items()})


def _block_plan(cfg: DenoiserConfig) -> list[tuple[str, int, int]]:
    """(prefix, in_channels, out_channels) for every residual block, in
    forward execution order."""
    chans = cfg.level_channels
    plan = []
    cin = cfg.base_channels
    for l, ch in enumerate(chans):
        plan.append((f"down{l}", cin, ch))
        cin = ch
    plan.append(("mid", cin, cin))
    for l in reversed(range(cfg.depth)):
        plan.append((f"up{l}", cin + chans[l], chans[l]))
        cin = chans[l]
    return plan


def parameter_shapes(cfg: DenoiserConfig) -> dict[str, tuple[int, ...]]:
    """Tensor shapes keyed by layer name, in init order."""
    ted = cfg.time_embed_dim
    base = cfg.base_channels
    shapes: dict[str, tuple[int, ...]] = {
        "temb.w1": (ted, ted),
        "temb.b1": (ted,),
        "temb.w2": (ted, ted),
        "temb.b2": (ted,),
        "stem.w": (base, cfg.in_channels, 3, 3),
        "stem.b": (base,),
    }
    for prefix, cin, cout in _block_plan(cfg):
        shapes[f"{prefix}.gn1.g"] = (cin,)
        shapes[f"{prefix}.gn1.b"] = (cin,)
        shapes[f"{prefix}.conv1.w"] = (cout, cin, 3, 3)
        shapes[f"{prefix}.conv1.b"] = (cout,)
        shapes[f"{prefix}.temb.w"] = (cout, ted)
        shapes[f"{prefix}.temb.b"] = (cout,)
        shapes[f"{prefix}.gn2.g"] = (cout,)
        shapes[f"{prefix}.gn2.b"] = (cout,)
        shapes[f"{prefix}.conv2.w"] = (cout, cout, 3, 3)
        shapes[f"{prefix}.conv2.b"] = (cout,)
        if cin != cout:
            shapes[f"{prefix}.skip.w"] = (cout, cin, 1, 1)
            shapes[f"{prefix}.skip.b"] = (cout,)
    shapes["head.gn.g"] = (base,)
    shapes["head.gn.b"] = (base,)
    shapes["head.conv.w"] = (1, base, 3, 3)
    shapes["head.conv.b"] = (1,)
    return shapes


class DenoiserParams(Mapping):
    """Named parameter tensors plus the architecture they belong to."""

    def __init__(self, config: DenoiserConfig, tensors: dict[str, np.ndarray]):
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "DenoiserParams":
        return DenoiserParams(self.config, {k: v.astype(dtype) for k, v in self.tensors.items()})

    def validate(self) -> None:
        expected = parameter_shapes(self.config)
        if set(expected) != set(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ConfigError(f"parameter names mismatch: missing {missing}, extra {extra}")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ConfigError(
                    f"parameter {name}: shape {self.tensors[name].shape}, expected {shape}"
                )
            if not np.isfinite(self.tensors[name]).all():
                raise ConfigError(f"parameter {name} contains non-finite entries")


def init_params(config: DenoiserConfig, seed: int, dtype=np.float32) -> DenoiserParams:
    """Fan-in-scaled uniform weights, zero biases, unit norm scales, zero head."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(config).items():
        if name.startswith("head.conv"):
            tensors[name] = np.zeros(shape, dtype=dtype)
        elif name.endswith(".g"):
            tensors[name] = np.ones(shape, dtype=dtype)
        elif len(shape) == 1:
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return DenoiserParams(config, tensors)


def sinusoidal_time_embedding(t: int | float, dim: int) -> np.ndarray:
    """entry 2k = sin(t / 10000^(2k/dim)), entry 2k+1 = cos(t / 10000^(2k/dim))."""
    if dim % 2 != 0:
        raise ConfigError(f"embedding dim must be even, got {dim}")
    k = np.arange(dim // 2, dtype=np.float64)
    angles = float(t) / np.power(10000.0, 2.0 * k / dim)
    out = np.empty(dim, dtype=np.float64)
    out[0::2] = np.sin(angles)
    out[1::2] = np.cos(angles)
    return out


def _embed_batch(ts: np.ndarray, dim: int, dtype) -> np.ndarray:
    k = np.arange(dim // 2, dtype=np.float64)
    angles = np.asarray(ts, dtype=np.float64)[:, None] / np.power(10000.0, 2.0 * k / dim)
    out = np.empty((len(ts), dim), dtype=np.float64)
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out.astype(dtype)


def _resblock_forward(t: Mapping, prefix: str, x: np.ndarray, tfeat: np.ndarray, groups: int):
    h1, gn1c = layers.group_norm(x, t[f"{prefix}.gn1.g"], t[f"{prefix}.gn1.b"], groups)
    a1, s1c = layers.silu(h1)
    c1, cols1 = layers.conv2d(a1, t[f"{prefix}.conv1.w"], t[f"{prefix}.conv1.b"])
    tp = layers.linear(tfeat, t[f"{prefix}.temb.w"], t[f"{prefix}.temb.b"])
    h2 = c1 + tp[:, :, None, None]
    h3, gn2c = layers.group_norm(h2, t[f"{prefix}.gn2.g"], t[f"{prefix}.gn2.b"], groups)
    a2, s2c = layers.silu(h3)
    c2, cols2 = layers.conv2d(a2, t[f"{prefix}.conv2.w"], t[f"{prefix}.conv2.b"])
    if f"{prefix}.skip.w" in t:
        xs, colss = layers.conv2d(x, t[f"{prefix}.skip.w"], t[f"{prefix}.skip.b"])
    else:
        xs, colss = x, None
    cache = (x.shape, h2.shape, gn1c, s1c, cols1, tfeat, gn2c, s2c, cols2, colss)
    return c2 + xs, cache


def _acc(g: dict, name: str, value: np.ndarray) -> None:
    if name in g:
        g[name] += value
    else:
        g[name] = value


def _resblock_backward(t: Mapping, g: dict, prefix: str, dy: np.ndarray, cache, groups: int):
    x_shape, h2_shape, gn1c, s1c, cols1, tfeat, gn2c, s2c, cols2, colss = cache
    if colss is not None:
        dxs, dws, dbs = layers.conv2d_backward(dy, x_shape, t[f"{prefix}.skip.w"], colss)
        _acc(g, f"{prefix}.skip.w", dws)
        _acc(g, f"{prefix}.skip.b", dbs)
    else:
        dxs = dy
    da2, dw2, db2 = layers.conv2d_backward(dy, h2_shape, t[f"{prefix}.conv2.w"], cols2)
    _acc(g, f"{prefix}.conv2.w", dw2)
    _acc(g, f"{prefix}.conv2.b", db2)
    dh3 = layers.silu_backward(da2, s2c)
    dh2, dg2, db2n = layers.group_norm_backward(dh3, t[f"{prefix}.gn2.g"], groups, gn2c)
    _acc(g, f"{prefix}.gn2.g", dg2)
    _acc(g, f"{prefix}.gn2.b", db2n)
    dtp = dh2.sum(axis=(2, 3))
    dtfeat, dwt, dbt = layers.linear_backward(dtp, tfeat, t[f"{prefix}.temb.w"])
    _acc(g, f"{prefix}.temb.w", dwt)
    _acc(g, f"{prefix}.temb.b", dbt)
    da1, dw1, db1 = layers.conv2d_backward(dh2, x_shape, t[f"{prefix}.conv1.w"], cols1)
    _acc(g, f"{prefix}.conv1.w", dw1)
    _acc(g, f"{prefix}.conv1.b", db1)
    dh1 = layers.silu_backward(da1, s1c)
    dx, dg1, db1n = layers.group_norm_backward(dh1, t[f"{prefix}.gn1.g"], groups, gn1c)
    _acc(g, f"{prefix}.gn1.g", dg1)
    _acc(g, f"{prefix}.gn1.b", db1n)
    return dx + dxs, dtfeat


def _unet_forward(t: Mapping, cfg: DenoiserConfig, x2: np.ndarray, ts: np.ndarray):
    """x2 (B, in_channels, S, S), ts (B,) integer steps. Returns (B, 1, S, S)."""
    groups = cfg.norm_groups
    chans = cfg.level_channels
    s = cfg.image_side

    emb = _embed_batch(ts, cfg.time_embed_dim, x2.dtype)
    z1 = layers.linear(emb, t["temb.w1"], t["temb.b1"])
    a1, sa1 = layers.silu(z1)
    z2 = layers.linear(a1, t["temb.w2"], t["temb.b2"])
    tfeat, sa2 = layers.silu(z2)

    h, cols_stem = layers.conv2d(x2, t["stem.w"], t["stem.b"])
    block_caches: dict[str, tuple] = {}
    skips = []
    side = s
    for l in range(cfg.depth):
        h, block_caches[f"down{l}"] = _resblock_forward(t, f"down{l}", h, tfeat, groups)
        assert h.shape[1:] == (chans[l], side, side)
        skips.append(h)
        h = layers.avg_pool2(h)
        side //= 2
    h, block_caches["mid"] = _resblock_forward(t, "mid", h, tfeat, groups)
    assert h.shape[1:] == (chans[-1], side, side)
    for l in reversed(range(cfg.depth)):
        h = layers.upsample2(h)
        side *= 2
        h = np.concatenate([h, skips[l]], axis=1)
        h, block_caches[f"up{l}"] = _resblock_forward(t, f"up{l}", h, tfeat, groups)
        assert h.shape[1:] == (chans[l], side, side)

    hn, gn_head = layers.group_norm(h, t["head.gn.g"], t["head.gn.b"], groups)
    ha, silu_head = layers.silu(hn)
    y, cols_head = layers.conv2d(ha, t["head.conv.w"], t["head.conv.b"])
    cache = {
        "emb": emb,
        "sa1": sa1,
        "a1": a1,
        "sa2": sa2,
        "x2_shape": x2.shape,
        "cols_stem": cols_stem,
        "blocks": block_caches,
        "gn_head": gn_head,
        "silu_head": silu_head,
        "cols_head": cols_head,
        "ha_shape": ha.shape,
    }
    return y, cache


def _unet_backward(t: Mapping, cfg: DenoiserConfig, cache: dict, dy: np.ndarray) -> dict:
    groups = cfg.norm_groups
    chans = cfg.level_channels
    g: dict[str, np.ndarray] = {}

    dha, dwh, dbh = layers.conv2d_backward(dy, cache["ha_shape"], t["head.conv.w"], cache["cols_head"])
    _acc(g, "head.conv.w", dwh)
    _acc(g, "head.conv.b", dbh)
    dhn = layers.silu_backward(dha, cache["silu_head"])
    dh, dgh, dbgh = layers.group_norm_backward(dhn, t["head.gn.g"], groups, cache["gn_head"])
    _acc(g, "head.gn.g", dgh)
    _acc(g, "head.gn.b", dbgh)

    blocks = cache["blocks"]
    dtfeat_total = None
    dskips: dict[int, np.ndarray] = {}
    for l in range(cfg.depth):  # up blocks, reverse execution order
        dh, dtf = _resblock_backward(t, g, f"up{l}", dh, blocks[f"up{l}"], groups)
        dtfeat_total = dtf if dtfeat_total is None else dtfeat_total + dtf
        up_ch = chans[-1] if l == cfg.depth - 1 else chans[l + 1]
        dup, dskips[l] = dh[:, :up_ch], dh[:, up_ch:]
        dh = layers.upsample2_backward(dup)
    dh, dtf = _resblock_backward(t, g, "mid", dh, blocks["mid"], groups)
    dtfeat_total += dtf
    for l in reversed(range(cfg.depth)):
        dh = layers.avg_pool2_backward(dh)
        dh = dh + dskips[l]
        dh, dtf = _resblock_backward(t, g, f"down{l}", dh, blocks[f"down{l}"], groups)
        dtfeat_total += dtf

    _, dws, dbs = layers.conv2d_backward(dh, cache["x2_shape"], t["stem.w"], cache["cols_stem"])
    _acc(g, "stem.w", dws)
    _acc(g, "stem.b", dbs)

    dz2 = layers.silu_backward(dtfeat_total, cache["sa2"])
    da1, dw2, db2 = layers.linear_backward(dz2, cache["a1"], t["temb.w2"])
    _acc(g, "temb.w2", dw2)
    _acc(g, "temb.b2", db2)
    dz1 = layers.silu_backward(da1, cache["sa1"])
    _, dw1, db1 = layers.linear_backward(dz1, cache["emb"], t["temb.w1"])
    _acc(g, "temb.w1", dw1)
    _acc(g, "temb.b1", db1)
    return g


def _stack_inputs(cfg: DenoiserConfig, x_t: np.ndarray, mask: np.ndarray, dtype) -> np.ndarray:
    b, s, _ = x_t.shape
    x2 = np.empty((b, cfg.in_channels, s, s), dtype=dtype)
    x2[:, 0] = x_t
    x2[:, 1] = mask.astype(dtype)
    return x2


def predict_noise_batch(
    params: DenoiserParams, x_t: np.ndarray, mask: np.ndarray, ts: np.ndarray
) -> np.ndarray:
    """Vectorized noise prediction: x_t (B, S, S), shared mask, ts (B,)."""
    cfg = params.config
    s = cfg.image_side
    x_t = np.asarray(x_t)
    if x_t.ndim != 3 or x_t.shape[1:] != (s, s):
        raise ValueError(f"x_t batch must have shape (B, {s}, {s}), got {x_t.shape}")
    if mask.shape != (s, s):
        raise ValueError(f"mask must have shape ({s}, {s}), got {mask.shape}")
    ts = np.asarray(ts)
    if ts.shape != (x_t.shape[0],):
        raise ValueError(f"ts must have shape ({x_t.shape[0]},), got {ts.shape}")
    if np.any(ts < 1):
        raise ValueError("step indices must be >= 1")
    if not np.isfinite(x_t).all():
        raise ValueError("non-finite values in x_t")
    x2 = _stack_inputs(cfg, x_t.astype(params.dtype, copy=False), mask, params.dtype)
    y, _ = _unet_forward(params, cfg, x2, ts)
    return y[:, 0]


def predict_noise(params: DenoiserParams, x_t: np.ndarray, mask: np.ndarray, t: int) -> np.ndarray:
    """Predicted injected noise for a single S x S image at step t."""
    out = predict_noise_batch(params, np.asarray(x_t)[None], mask, np.array([t]))
    return out[0]


def loss_and_grad(
    params: DenoiserParams,
    x_t: np.ndarray,
    mask: np.ndarray,
    ts: np.ndarray,
    true_noise: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Masked denoising loss and its exact parameter gradients.

    Loss is the mean squared prediction error over batch and over M = 1
    cells only; cells with M = 0 contribute exactly nothing to either the
    loss or any gradient.
    """
    cfg = params.config
    x_t = np.asarray(x_t)
    true_noise = np.asarray(true_noise)
    if x_t.ndim != 3 or x_t.shape[0] == 0:
        raise ValueError(f"batch must be non-empty with shape (B, S, S), got {x_t.shape}")
    if true_noise.shape != x_t.shape:
        raise ValueError(f"true_noise shape {true_noise.shape} != x_t shape {x_t.shape}")
    mask_f = mask.astype(params.dtype)
    k = float(mask_f.sum())
    if k == 0:
        raise ValueError("all-zero mask: masked mean is undefined")
    b = x_t.shape[0]
    ts = np.asarray(ts)
    x2 = _stack_inputs(cfg, x_t.astype(params.dtype, copy=False), mask, params.dtype)
    y, cache = _unet_forward(params, cfg, x2, ts)
    diff = (y[:, 0] - true_noise.astype(params.dtype, copy=False)) * mask_f
    loss = float((diff.astype(np.float64) ** 2).sum() / (b * k))
    dy = (2.0 / (b * k)) * diff
    grads = _unet_backward(params, cfg, cache, dy[:, None].astype(params.dtype))
    return loss, grads
