"""Synthetic hourly datasets for smoke tests, demos, and calibration runs."""

from __future__ import annotations

import numpy as np


def phase_shifted_sinusoids(
    rows: int,
    features: int,
    *,
    noise_std: float = 0.05,
    period: float = 24.0,
    seed: int = 0,
) -> np.ndarray:
    """(rows, features) matrix: unit sinusoids with evenly spaced phases plus
    Gaussian noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(rows, dtype=np.float64)[:, None]
    phases = 2.0 * np.pi * np.arange(features, dtype=np.float64)[None, :] / features
    clean = np.sin(2.0 * np.pi * t / period + phases)
    return clean + noise_std * rng.standard_normal((rows, features))


def write_synthetic_csv(
    path,
    rows: int,
    *,
    features: int = 16,
    seed: int = 0,
    start: str = "2012-01-01T00:00:00",
    power_cap: float = 1.5,
    noise_std: float = 0.05,
) -> None:
    """Hourly CSV with a solar-like day/night structure.

    Columns: timestamp, power, radiation, then (features - 2) phase-shifted
    sinusoid features. Radiation is a clean half-sine over 06:00-18:00, so
    daylight detection is stable; power follows radiation with multiplicative
    noise and is exactly zero at night.
    """
    if features < 3:
        raise ValueError("need at least 3 feature columns (power, radiation, one extra)")
    rng = np.random.default_rng(seed)
    t0 = np.datetime64(start, "s")
    timestamps = t0 + np.arange(rows) * np.timedelta64(1, "h")
    hod = ((timestamps - timestamps.astype("datetime64[D]")) // np.timedelta64(1, "h")).astype(int)
    radiation = np.sin(np.pi * (hod - 6.0) / 12.0)
    radiation[(hod < 6) | (hod > 18)] = 0.0
    radiation = np.clip(radiation, 0.0, None)
    power = power_cap * radiation * (1.0 + noise_std * rng.standard_normal(rows))
    power[radiation == 0.0] = 0.0
    extra = phase_shifted_sinusoids(
        rows, features - 2, noise_std=noise_std, seed=seed + 1
    )

    names = ["power", "radiation"] + [f"f{j}" for j in range(features - 2)]
    with open(path, "w", newline="") as fh:
        fh.write("timestamp," + ",".join(names) + "\n")
        for i in range(rows):
            ts = str(timestamps[i]).replace("T", " ")
            vals = [power[i], radiation[i]] + list(extra[i])
            fh.write(ts + "," + ",".join(f"{v:.8f}" for v in vals) + "\n")
