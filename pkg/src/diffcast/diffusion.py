"""The three phases of the conditional scheme.

Forward: noise only the masked (target) region of a padded patch, leaving
conditioning rows and padding untouched. Training: minimize the masked
noise-prediction objective over uniformly sampled steps. Reverse: ancestral
sampling restricted to masked cells, re-imposing the clean conditioning
rows and zero padding after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import data as data_mod
from . import patching
from .denoiser import DenoiserConfig, DenoiserParams, init_params, loss_and_grad, predict_noise_batch
from .errors import ConfigError, DivergenceError
from .patching import PatchSpec, build_mask
from .schedule import NoiseSchedule, coefficients_at


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    seed: int = 0
    val_every: int = 0  # 0 disables validation passes

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.val_every < 0:
            raise ConfigError("val_every must be >= 0")


@dataclass
class ForecastResult:
    """One completed window: conditioning rows are the input history, bitwise."""

    completed: np.ndarray  # (window_rows, F), normalized units
    target_values: np.ndarray  # (target_rows, F), normalized units
    power: np.ndarray | None  # (target_rows,) denormalized power
    power_std: np.ndarray | None  # present when sampled more than once
    seed: object


def forward_noise(
    x0: np.ndarray, mask: np.ndarray, schedule: NoiseSchedule, t: int, eps: np.ndarray
) -> np.ndarray:
    """Masked closed-form noising at step t.

    Cells with M = 0 keep their clean value bitwise; cells with M = 1 become
    sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
    """
    x0 = np.asarray(x0)
    eps = np.asarray(eps)
    if x0.shape != eps.shape or x0.shape != mask.shape:
        raise ValueError(
            f"shape mismatch: x0 {x0.shape}, eps {eps.shape}, mask {mask.shape}"
        )
    c = coefficients_at(schedule, t)
    noised = c.sqrt_ab * x0 + c.sqrt_1mab * eps
    return np.where(np.asarray(mask, dtype=bool), noised, x0)


def _forward_noise_batch(x0, mask, schedule, ts, eps):
    sab = np.sqrt(schedule.alpha_bars[ts - 1]).astype(x0.dtype)[:, None, None]
    s1ab = np.sqrt(1.0 - schedule.alpha_bars[ts - 1]).astype(x0.dtype)[:, None, None]
    noised = sab * x0 + s1ab * eps
    return np.where(np.asarray(mask, dtype=bool)[None], noised, x0)


class Adam:
    """Adaptive-moment optimizer updating parameter tensors in place."""

    def __init__(self, params: DenoiserParams, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in self.params.tensors.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(
    patches: np.ndarray,
    spec: PatchSpec,
    schedule: NoiseSchedule,
    denoiser_config: DenoiserConfig,
    training_config: TrainingConfig,
    *,
    val_patches: np.ndarray | None = None,
    log=None,
) -> tuple[DenoiserParams, list[dict]]:
    """Train the denoiser on stride-1 patches.

    Each epoch visits every patch once with a freshly sampled (t, eps) pair,
    in a seeded shuffled order. Returns the trained parameters and a
    per-epoch loss history (val_loss is NaN on epochs without a validation
    pass). Aborts with DivergenceError naming the step if the loss goes
    non-finite.
    """
    patches = np.asarray(patches, dtype=np.float32)
    if patches.ndim != 3 or patches.shape[0] == 0:
        raise ConfigError(f"patch set must be non-empty (P, m, F), got {patches.shape}")
    if denoiser_config.image_side != spec.image_side:
        raise ConfigError("denoiser image_side must match the patch spec")
    images = patching.pad_batch(patches, spec)
    mask = build_mask(spec)
    n = images.shape[0]
    side = spec.image_side
    tcfg = training_config

    ss = np.random.SeedSequence(tcfg.seed)
    init_ss, noise_ss, val_ss = ss.spawn(3)
    params = init_params(denoiser_config, init_ss)
    rng = np.random.default_rng(noise_ss)
    opt = Adam(params, lr=tcfg.learning_rate)

    val_images = None
    if val_patches is not None and len(val_patches) > 0:
        val_images = patching.pad_batch(np.asarray(val_patches, dtype=np.float32), spec)
        val_rng = np.random.default_rng(val_ss)
        val_ts = val_rng.integers(1, schedule.T + 1, size=len(val_images))
        val_eps = val_rng.standard_normal(val_images.shape, dtype=np.float32)
        val_xt = _forward_noise_batch(val_images, mask, schedule, val_ts, val_eps)

    history: list[dict] = []
    step = 0
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, tcfg.batch_size):
            idx = order[lo : lo + tcfg.batch_size]
            x0 = images[idx]
            ts = rng.integers(1, schedule.T + 1, size=len(idx))
            eps = rng.standard_normal(x0.shape, dtype=np.float32)
            x_t = _forward_noise_batch(x0, mask, schedule, ts, eps)
            loss, grads = loss_and_grad(params, x_t, mask, ts, eps)
            step += 1
            if not math.isfinite(loss):
                raise DivergenceError(f"training loss non-finite at step {step}", step=step)
            opt.step(grads)
            total += loss * len(idx)
        train_loss = total / n
        val_loss = float("nan")
        if val_images is not None and tcfg.val_every > 0 and epoch % tcfg.val_every == 0:
            val_total = 0.0
            for lo in range(0, len(val_images), tcfg.batch_size):
                sl = slice(lo, lo + tcfg.batch_size)
                vloss, _ = loss_and_grad(params, val_xt[sl], mask, val_ts[sl], val_eps[sl])
                val_total += vloss * (min(lo + tcfg.batch_size, len(val_images)) - lo)
            val_loss = val_total / len(val_images)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if log is not None:
            log(history[-1])
    return params, history


def _sample_reverse_batch(
    params: DenoiserParams,
    histories: np.ndarray,
    spec: PatchSpec,
    schedule: NoiseSchedule,
    seeds,
    *,
    validate: bool = False,
) -> np.ndarray:
    """Reverse-sample a batch of windows, one RNG stream per window.

    Window i's noise draws depend only on seeds[i], so batched and
    one-at-a-time sampling agree to float32 precision (BLAS may reorder
    accumulations across batch shapes); a fixed batching is bit-reproducible
    run to run.
    """
    b, cond, f = histories.shape
    if cond != spec.cond_rows or f != spec.feature_count:
        raise ValueError(
            f"histories must be (B, {spec.cond_rows}, {spec.feature_count}), got {histories.shape}"
        )
    side = spec.image_side
    m = spec.window_rows
    mask = build_mask(spec)
    mask_b = mask.astype(bool)
    gens = [np.random.default_rng(s) for s in seeds]
    tgt = (spec.target_rows, f)

    img = np.zeros((b, side, side), dtype=np.float32)
    img[:, :cond, :f] = histories
    for i, gen in enumerate(gens):
        img[i, cond:m, :f] = gen.standard_normal(tgt, dtype=np.float32)

    for t in range(schedule.T, 0, -1):
        eps_hat = predict_noise_batch(params, img, mask, np.full(b, t))
        c = coefficients_at(schedule, t)
        mean = (img - (c.beta / c.sqrt_1mab) * eps_hat) / math.sqrt(c.alpha)
        if t > 1:
            z = np.zeros_like(img)
            for i, gen in enumerate(gens):
                z[i, cond:m, :f] = gen.standard_normal(tgt, dtype=np.float32)
            cand = mean + c.posterior_sigma * z
        else:
            cand = mean
        # update M = 1 cells only; conditioning rows and padding stay bitwise
        img = np.where(mask_b[None], cand, img)
        if not np.isfinite(img).all():
            raise DivergenceError(f"non-finite sample at reverse step {t}", step=t)
        if validate:
            assert np.array_equal(img[:, :cond, :f], histories)
            assert not img[:, m:, :].any() and not img[:, :, f:].any()
    return img


def sample_reverse(
    params: DenoiserParams,
    history: np.ndarray,
    spec: PatchSpec,
    schedule: NoiseSchedule,
    seed,
    *,
    num_samples: int = 1,
    normalizer: data_mod.Normalizer | None = None,
    power_index: int | None = None,
    validate: bool = False,
) -> ForecastResult:
    """Complete one window from cond_rows of normalized history.

    With num_samples > 1, the reported values are per-cell means across
    stochastic samples and a per-step standard deviation of the denormalized
    power is included.
    """
    history = np.asarray(history, dtype=np.float32)
    if history.shape != (spec.cond_rows, spec.feature_count):
        raise ValueError(
            f"history must be ({spec.cond_rows}, {spec.feature_count}), got {history.shape}"
        )
    if num_samples < 1:
        raise ConfigError("num_samples must be >= 1")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(num_samples)
    stack = np.broadcast_to(history, (num_samples,) + history.shape)
    images = _sample_reverse_batch(params, stack, spec, schedule, children, validate=validate)
    samples = np.stack([patching.unpad(im, spec) for im in images])  # (n, m, F)

    completed = samples[0] if num_samples == 1 else samples.mean(axis=0)
    completed[: spec.cond_rows] = history  # exact, not up to rounding
    target = completed[spec.cond_rows :].copy()

    power = power_std = None
    if normalizer is not None and power_index is not None:
        if power_index >= spec.feature_count:
            raise ConfigError(
                f"power column index {power_index} outside the selected {spec.feature_count} features"
            )
        power = normalizer.invert_column(target[:, power_index], power_index)
        if num_samples > 1:
            per_sample = np.stack(
                [normalizer.invert_column(s[spec.cond_rows :, power_index], power_index) for s in samples]
            )
            power_std = per_sample.std(axis=0)
    return ForecastResult(
        completed=completed,
        target_values=target,
        power=power,
        power_std=power_std,
        seed=seed,
    )


def forecast_day(
    params: DenoiserParams,
    series: data_mod.RawSeries,
    spec: PatchSpec,
    day,
    normalizer: data_mod.Normalizer,
    schedule: NoiseSchedule,
    seed: int,
    *,
    daylight_threshold: float = 0.0,
    num_samples: int = 1,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-hour power forecast for one day, night hours zeroed.

    The conditioning window slides across the day's daytime hours in steps
    of target_rows; each reverse sample contributes up to target_rows hours.
    Every window draws its noise from a seed derived from (seed, window
    index), so windows are independent and order-insensitive.
    """
    day = np.datetime64(day, "D")
    mask24 = data_mod.daylight_mask(series, day, daylight_threshold)
    stddev = np.zeros(24) if num_samples > 1 else None
    out = np.zeros(24)
    if not mask24.any():
        return out, stddev
    if series.power_index >= spec.feature_count:
        raise ConfigError(
            f"power column index {series.power_index} outside the selected "
            f"{spec.feature_count} features"
        )
    i0 = data_mod.day_start_index(series, day)
    covered = np.zeros(24, dtype=bool)
    window_index = 0
    for h in range(24):
        if not mask24[h] or covered[h]:
            continue
        lo = i0 + h - spec.cond_rows
        if lo < 0:
            raise ConfigError(f"insufficient history before {day} hour {h}")
        hist = normalizer.apply(series.values[lo : i0 + h])[:, : spec.feature_count]
        result = sample_reverse(
            params,
            hist.astype(np.float32),
            spec,
            schedule,
            np.random.SeedSequence([int(seed) & 0xFFFFFFFF, window_index]),
            num_samples=num_samples,
            normalizer=normalizer,
            power_index=series.power_index,
        )
        for off in range(spec.target_rows):
            hh = h + off
            if hh >= 24:
                break
            covered[hh] = True
            if mask24[hh]:
                out[hh] = result.power[off]
                if stddev is not None:
                    stddev[hh] = result.power_std[off]
        window_index += 1
    out = data_mod.apply_night_zeroing(out, mask24)
    return out, stddev
