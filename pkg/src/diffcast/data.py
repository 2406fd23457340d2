"""Hourly multivariate series ingestion, normalization, daylight handling, splits.

The CSV contract: a header row, one timestamp column, and numeric feature
columns (one row per hour, strictly increasing). Power and radiation columns
are named in the config. Daylight for a given day is decided from the
preceding day's radiation profile; night hours of a forecast are forced to
zero.
"""

from __future__ import annotations

import csv
import datetime as _dt
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

HOUR = np.timedelta64(1, "h")


@dataclass(frozen=True)
class RawSeries:
    timestamps: np.ndarray  # datetime64[s], strictly increasing, hourly
    values: np.ndarray  # (L, F) float64
    feature_names: list[str]
    power_index: int
    radiation_index: int

    def __post_init__(self):
        self.timestamps.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def feature_count(self) -> int:
        return self.values.shape[1]

    def index_of(self, ts: np.datetime64) -> int:
        i = int(np.searchsorted(self.timestamps, ts))
        if i >= self.length or self.timestamps[i] != ts:
            raise DataError(f"timestamp {ts} not present in series")
        return i


def _parse_timestamp(text: str, fmt: str | None, row: int) -> np.datetime64:
    try:
        if fmt:
            dt = _dt.datetime.strptime(text.strip(), fmt)
        else:
            dt = _dt.datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataError(f"row {row}: unparseable timestamp {text!r}: {exc}") from None
    return np.datetime64(dt, "s")


def load_csv(
    path,
    *,
    timestamp_column: str = "timestamp",
    power_column: str = "power",
    radiation_column: str = "radiation",
    timestamp_format: str | None = None,
    ignore_columns: tuple[str, ...] = (),
    forward_fill: bool = False,
) -> RawSeries:
    """Load an hourly CSV into a RawSeries.

    Rows are 1-indexed in error messages (row 1 = header). Missing values are
    a hard error unless forward_fill is set, in which case each gap takes the
    previous row's value for that column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if timestamp_column not in header:
            raise DataError(f"{path}: missing timestamp column {timestamp_column!r}")
        ts_idx = header.index(timestamp_column)
        skip = {ts_idx} | {header.index(c) for c in ignore_columns if c in header}
        feature_names = [h for i, h in enumerate(header) if i not in skip]
        feature_cols = [i for i in range(len(header)) if i not in skip]
        for required in (power_column, radiation_column):
            if required not in feature_names:
                raise DataError(f"{path}: missing feature column {required!r}")

        timestamps: list[np.datetime64] = []
        rows: list[list[float]] = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise DataError(
                    f"{path}: row {lineno}: expected {len(header)} cells, got {len(cells)}"
                )
            timestamps.append(_parse_timestamp(cells[ts_idx], timestamp_format, lineno))
            vals = []
            for j, col in enumerate(feature_cols):
                text = cells[col].strip()
                value = float("nan") if text == "" else _parse_float(text, lineno, header[col])
                if not np.isfinite(value):
                    if forward_fill and rows:
                        value = rows[-1][j]
                    else:
                        raise DataError(
                            f"{path}: row {lineno}: non-finite value in column {header[col]!r}"
                        )
                vals.append(value)
            rows.append(vals)

    if not rows:
        raise DataError(f"{path}: no data rows")
    ts = np.array(timestamps, dtype="datetime64[s]")
    gaps = np.diff(ts)
    bad = np.nonzero(gaps != HOUR)[0]
    if bad.size:
        # +2 for the header row, +1 to land on the second row of the bad pair
        raise DataError(
            f"{path}: row {int(bad[0]) + 3}: timestamps must advance by exactly one hour "
            f"(gap of {gaps[bad[0]]} after {ts[bad[0]]})"
        )
    values = np.array(rows, dtype=np.float64)
    return RawSeries(
        timestamps=ts,
        values=values,
        feature_names=feature_names,
        power_index=feature_names.index(power_column),
        radiation_index=feature_names.index(radiation_column),
    )


def _parse_float(text: str, lineno: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"row {lineno}: unparseable number {text!r} in column {column!r}") from None


@dataclass(frozen=True)
class Normalizer:
    """Per-feature min-max scaling to [-1, 1], fitted on the training split only.

    Zero (the padding value) then sits at each feature's midpoint. Constant
    features map identically to 0.
    """

    mins: np.ndarray
    maxs: np.ndarray
    constant: np.ndarray = field(default=None)  # bool per feature

    def __post_init__(self):
        if self.constant is None:
            object.__setattr__(self, "constant", self.maxs <= self.mins)
        for arr in (self.mins, self.maxs, self.constant):
            arr.setflags(write=False)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        span = np.where(self.constant, 1.0, self.maxs - self.mins)
        out = 2.0 * (x - self.mins) / span - 1.0
        return np.where(self.constant, 0.0, out)

    def invert(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        span = np.where(self.constant, 0.0, self.maxs - self.mins)
        return self.mins + (y + 1.0) * span / 2.0

    def apply_column(self, x: np.ndarray, j: int) -> np.ndarray:
        if self.constant[j]:
            return np.zeros_like(np.asarray(x, dtype=np.float64))
        return 2.0 * (np.asarray(x, dtype=np.float64) - self.mins[j]) / (self.maxs[j] - self.mins[j]) - 1.0

    def invert_column(self, y: np.ndarray, j: int) -> np.ndarray:
        if self.constant[j]:
            return np.full_like(np.asarray(y, dtype=np.float64), self.mins[j])
        return self.mins[j] + (np.asarray(y, dtype=np.float64) + 1.0) * (self.maxs[j] - self.mins[j]) / 2.0

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(
            mins=np.asarray(d["mins"], dtype=np.float64),
            maxs=np.asarray(d["maxs"], dtype=np.float64),
        )


def fit_normalizer(series: RawSeries, train_range: tuple[int, int]) -> Normalizer:
    """Fit per-feature (min, max) on rows [start, stop) of the series."""
    start, stop = train_range
    if stop <= start:
        raise ConfigError(f"empty training range [{start}, {stop})")
    block = series.values[start:stop]
    mins = block.min(axis=0)
    maxs = block.max(axis=0)
    constant = maxs <= mins
    if constant.any():
        names = [series.feature_names[i] for i in np.nonzero(constant)[0]]
        warnings.warn(
            f"constant feature(s) on the training split map to 0: {names}",
            stacklevel=2,
        )
    return Normalizer(mins=mins, maxs=maxs, constant=constant)


def day_of(ts: np.datetime64) -> np.datetime64:
    return ts.astype("datetime64[D]")


def day_start_index(series: RawSeries, day: np.datetime64) -> int:
    """Index of hour 0 of the given day; requires the full 24 hours present."""
    day = np.datetime64(day, "D")
    start = day.astype("datetime64[s]")
    i = int(np.searchsorted(series.timestamps, start))
    if i >= series.length or series.timestamps[i] != start:
        raise DataError(f"day {day} does not start at hour 0 in the series")
    if i + 24 > series.length:
        raise DataError(f"day {day} is incomplete (fewer than 24 hours)")
    return i


def daylight_mask(series: RawSeries, day: np.datetime64, threshold: float = 0.0) -> np.ndarray:
    """Per-hour daylight flags for `day`, from the preceding day's radiation.

    Hour h counts as daytime iff the preceding day's radiation at hour h is
    strictly greater than the threshold (raw units).
    """
    day = np.datetime64(day, "D")
    prev = day - np.timedelta64(1, "D")
    try:
        i = day_start_index(series, prev)
    except DataError:
        raise DataError(
            f"no preceding day in the series for {day}; skip the first day"
        ) from None
    radiation = series.values[i : i + 24, series.radiation_index]
    return radiation > threshold


def apply_night_zeroing(forecast: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero the night hours; daytime hours pass through unchanged."""
    forecast = np.asarray(forecast)
    mask = np.asarray(mask, dtype=bool)
    if forecast.shape != mask.shape:
        raise DataError(f"length mismatch: forecast {forecast.shape} vs mask {mask.shape}")
    return np.where(mask, forecast, 0.0)


def chrono_split(series: RawSeries | int, fractions) -> tuple[tuple[int, int], ...]:
    """Contiguous chronological index ranges covering [0, L), no shuffling.

    Boundaries are floor(L * cumulative_fraction); the last range absorbs the
    remainder.
    """
    length = series if isinstance(series, int) else series.length
    fractions = [float(f) for f in fractions]
    if any(f <= 0.0 for f in fractions):
        raise ConfigError(f"fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {fractions} (sum {sum(fractions)})")
    bounds = [0]
    acc = 0.0
    for f in fractions[:-1]:
        acc += f
        bounds.append(int(np.floor(length * acc)))
    bounds.append(length)
    ranges = tuple((bounds[i], bounds[i + 1]) for i in range(len(fractions)))
    for lo, hi in ranges:
        if hi <= lo:
            raise ConfigError(f"degenerate split: empty range [{lo}, {hi}) for length {length}")
    return ranges
