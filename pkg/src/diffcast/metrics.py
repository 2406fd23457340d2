"""Forecast accuracy metrics over the daytime hours of each test day.

MAPE uses the day's mean actual power in the denominator, which avoids the
blow-up from near-zero hourly actuals. Aggregate values are means of the
per-day values; a pooled variant (all daytime hours concatenated) is
available behind a flag. All metrics are computed on physical-unit power.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import RawSeries
from .errors import DataError


def _check_pair(y_true, y_fore) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_fore = np.asarray(y_fore, dtype=np.float64)
    if y_true.shape != y_fore.shape:
        raise DataError(f"length mismatch: {y_true.shape} vs {y_fore.shape}")
    if y_true.size == 0:
        raise DataError("empty arrays")
    return y_true, y_fore


def mape(y_true, y_fore) -> float:
    """Mean absolute error relative to the mean actual value, in percent."""
    y_true, y_fore = _check_pair(y_true, y_fore)
    mean_true = y_true.mean()
    if mean_true == 0.0:
        raise DataError("mean of y_true is zero; restrict to daytime hours")
    return float(np.abs(y_true - y_fore).mean() / mean_true * 100.0)


def mse(y_true, y_fore) -> float:
    y_true, y_fore = _check_pair(y_true, y_fore)
    return float(((y_true - y_fore) ** 2).mean())


def rmse(y_true, y_fore) -> float:
    return math.sqrt(mse(y_true, y_fore))


def mae(y_true, y_fore) -> float:
    y_true, y_fore = _check_pair(y_true, y_fore)
    return float(np.abs(y_true - y_fore).mean())


def pearson(y_true, y_fore) -> float:
    """Linear correlation between the actual and predicted sequences."""
    y_true, y_fore = _check_pair(y_true, y_fore)
    if y_true.size < 2:
        raise DataError("pearson needs at least two points")
    dt = y_true - y_true.mean()
    df = y_fore - y_fore.mean()
    denom = math.sqrt(float((dt**2).sum())) * math.sqrt(float((df**2).sum()))
    if denom == 0.0:
        raise DataError("pearson undefined for a constant array")
    return float((dt * df).sum() / denom)


@dataclass(frozen=True)
class DayMetrics:
    day: str
    n: int
    mape_pct: float
    mape_frac: float
    mse: float
    rmse: float
    mae: float
    pearson: float


@dataclass(frozen=True)
class MetricReport:
    days: tuple[DayMetrics, ...]
    aggregate: DayMetrics
    horizon: int
    pooled: DayMetrics | None = None

    def rows(self) -> list[DayMetrics]:
        out = list(self.days) + [self.aggregate]
        if self.pooled is not None:
            out.append(self.pooled)
        return out

    def to_csv_text(self) -> str:
        lines = ["day,n,mape_pct,mape_frac,mse,rmse,mae,pearson"]
        for r in self.rows():
            lines.append(
                f"{r.day},{r.n},{r.mape_pct:.10g},{r.mape_frac:.10g},"
                f"{r.mse:.10g},{r.rmse:.10g},{r.mae:.10g},{r.pearson:.10g}"
            )
        return "\n".join(lines) + "\n"

    def to_json_text(self) -> str:
        doc = {
            "horizon": self.horizon,
            "days": [asdict(d) for d in self.days],
            "aggregate": asdict(self.aggregate),
            "pooled": None if self.pooled is None else asdict(self.pooled),
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _day_metrics(label: str, y_true, y_fore) -> DayMetrics:
    m = mse(y_true, y_fore)
    return DayMetrics(
        day=label,
        n=len(y_true),
        mape_pct=mape(y_true, y_fore),
        mape_frac=mape(y_true, y_fore) / 100.0,
        mse=m,
        rmse=math.sqrt(m),
        mae=mae(y_true, y_fore),
        pearson=pearson(y_true, y_fore),
    )


def read_forecast_csv(path) -> list[tuple[np.datetime64, float, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"timestamp", "true", "forecast"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected columns timestamp,true,forecast")
        for rec in reader:
            ts = np.datetime64(_dt.datetime.fromisoformat(rec["timestamp"]), "s")
            rows.append((ts, float(rec["true"]), float(rec["forecast"])))
    if not rows:
        raise DataError(f"{path}: no forecast rows")
    return rows


def evaluate(
    forecast_csv,
    series: RawSeries,
    daylight: dict,
    *,
    horizon: int,
    pooled: bool = False,
) -> MetricReport:
    """Per-day metrics over daytime hours, plus their mean across days.

    `daylight` maps each day (datetime64[D]) to its 24-hour daytime mask.
    Days with no daytime hours are skipped; it is an error if none remain.
    """
    rows = read_forecast_csv(forecast_csv)
    by_day: dict = {}
    for ts, y_true, y_fore in rows:
        series.index_of(ts)  # raises DataError on misaligned timestamps
        day = ts.astype("datetime64[D]")
        hour = int((ts - day.astype("datetime64[s]")) // np.timedelta64(1, "h"))
        by_day.setdefault(day, []).append((hour, y_true, y_fore))

    day_rows: list[DayMetrics] = []
    pool_true: list[float] = []
    pool_fore: list[float] = []
    for day in sorted(by_day):
        if day not in daylight:
            raise DataError(f"no daylight mask provided for {day}")
        mask24 = daylight[day]
        triples = [(h, yt, yf) for h, yt, yf in by_day[day] if mask24[h]]
        if not triples:
            continue
        y_true = [yt for _, yt, _ in triples]
        y_fore = [yf for _, _, yf in triples]
        day_rows.append(_day_metrics(str(day), y_true, y_fore))
        pool_true.extend(y_true)
        pool_fore.extend(y_fore)
    if not day_rows:
        raise DataError("no daytime hours in the evaluated range")

    agg = DayMetrics(
        day="aggregate",
        n=sum(d.n for d in day_rows),
        mape_pct=float(np.mean([d.mape_pct for d in day_rows])),
        mape_frac=float(np.mean([d.mape_frac for d in day_rows])),
        mse=float(np.mean([d.mse for d in day_rows])),
        rmse=float(np.mean([d.rmse for d in day_rows])),
        mae=float(np.mean([d.mae for d in day_rows])),
        pearson=float(np.mean([d.pearson for d in day_rows])),
    )
    pooled_row = _day_metrics("pooled", pool_true, pool_fore) if pooled else None
    return MetricReport(days=tuple(day_rows), aggregate=agg, horizon=horizon, pooled=pooled_row)
