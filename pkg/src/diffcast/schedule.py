"""Diffusion time axis: beta/alpha/alpha-bar sequences and per-step coefficients.

Steps are 1-indexed (t = 1..T) with alpha_bar(0) defined as 1, which makes
the t = 1 reverse step noise-free without a special case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise levels. Immutable after construction; safe to share."""

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def T(self) -> int:
        return len(self.betas)

    def __post_init__(self):
        for arr in (self.betas, self.alphas, self.alpha_bars):
            arr.setflags(write=False)
        if self.T < 1:
            raise ConfigError("schedule needs at least one step")
        if np.any(self.betas <= 0.0) or np.any(self.betas >= 1.0):
            raise ConfigError("all betas must lie strictly inside (0, 1)")
        if np.any(np.diff(self.alpha_bars) >= 0.0):
            raise ConfigError("alpha_bar must be strictly decreasing")


class StepCoefficients(NamedTuple):
    sqrt_ab: float
    sqrt_1mab: float
    alpha: float
    beta: float
    posterior_sigma: float


def make_linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta ramp from beta_start (t=1) to beta_end (t=T)."""
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(
            f"betas must satisfy 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=alpha_bars)


def coefficients_at(s: NoiseSchedule, t: int) -> StepCoefficients:
    """Coefficients for step t (1-indexed).

    posterior_sigma = sqrt(beta_t * (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)),
    with alpha_bar_0 = 1, hence posterior_sigma = 0 at t = 1.
    """
    if not 1 <= t <= s.T:
        raise ConfigError(f"step index {t} outside [1, {s.T}]")
    ab = s.alpha_bars[t - 1]
    ab_prev = 1.0 if t == 1 else s.alpha_bars[t - 2]
    beta = s.betas[t - 1]
    sigma = float(np.sqrt(beta * (1.0 - ab_prev) / (1.0 - ab)))
    return StepCoefficients(
        sqrt_ab=float(np.sqrt(ab)),
        sqrt_1mab=float(np.sqrt(1.0 - ab)),
        alpha=float(s.alphas[t - 1]),
        beta=float(beta),
        posterior_sigma=sigma,
    )
