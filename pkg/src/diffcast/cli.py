"""Command-line interface: prepare, train, forecast, evaluate, ablate, bench, synth.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure. Every command that takes --out copies its resolved config there, so
a run is reproducible from the output directory alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import data as data_mod
from . import diffusion, metrics, patching, plots, storage, synthetic
from .config import ExperimentConfig, dump_toml, load_config
from .errors import ConfigError, DataError, NumericalError
from .patching import PatchSpec


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _g(x: float) -> str:
    return f"{x:.10g}"


def _ensure_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(cfg: ExperimentConfig, out: Path) -> None:
    (out / "resolved.toml").write_text(dump_toml(cfg))


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(
            cfg,
            training=dataclasses.replace(cfg.training, seed=args.seed),
            forecast=dataclasses.replace(cfg.forecast, seed=args.seed),
        )
    return cfg


def _load_series(cfg: ExperimentConfig) -> data_mod.RawSeries:
    d = cfg.data
    return data_mod.load_csv(
        d.csv,
        timestamp_column=d.timestamp_column,
        power_column=d.power_column,
        radiation_column=d.radiation_column,
        timestamp_format=d.timestamp_format,
        ignore_columns=d.ignore_columns,
        forward_fill=d.forward_fill,
    )


def _check_power_selected(series: data_mod.RawSeries, spec: PatchSpec) -> None:
    if series.feature_count < spec.feature_count:
        raise ConfigError(
            f"series has {series.feature_count} features but the patch spec selects "
            f"{spec.feature_count}"
        )
    if series.power_index >= spec.feature_count:
        raise ConfigError(
            f"power column (index {series.power_index}) must be among the first "
            f"{spec.feature_count} feature columns"
        )


def _prepare_sections(series, cfg) -> tuple[dict, data_mod.Normalizer, tuple]:
    spec = cfg.patch
    _check_power_selected(series, spec)
    ranges = data_mod.chrono_split(series, cfg.data.split_fractions)
    normalizer = data_mod.fit_normalizer(series, ranges[0])
    norm = normalizer.apply(series.values).astype(np.float32)[:, : spec.feature_count]
    sections = {}
    for name, (lo, hi) in zip(("train", "val"), ranges[:2]):
        if hi - lo >= spec.window_rows:
            sections[name] = np.ascontiguousarray(
                patching.extract_patch_array(norm[lo:hi], spec)
            )
    if "train" not in sections:
        raise DataError(
            f"training split ({ranges[0]}) shorter than window_rows {spec.window_rows}"
        )
    return sections, normalizer, ranges


def cmd_prepare(args) -> int:
    cfg = _load_cfg(args)
    out = _ensure_out(args)
    series = _load_series(cfg)
    sections, normalizer, ranges = _prepare_sections(series, cfg)
    storage.save_patch_cache(
        out / "cache.bin",
        cfg.patch,
        sections,
        normalizer,
        extra={"csv": cfg.data.csv, "split_ranges": [list(r) for r in ranges]},
    )
    (out / "normalizer.json").write_text(
        json.dumps(normalizer.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    _write_resolved(cfg, out)
    counts = {k: len(v) for k, v in sections.items()}
    print(f"prepared {counts} patches -> {out / 'cache.bin'}")
    return 0


def _write_loss_log(path, history) -> None:
    lines = ["epoch,train_loss,val_loss"]
    for row in history:
        lines.append(f"{row['epoch']},{_g(row['train_loss'])},{_g(row['val_loss'])}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = _ensure_out(args)
    cache_path = Path(args.cache) if args.cache else out / "cache.bin"
    if not cache_path.exists():
        raise ConfigError(f"patch cache not found at {cache_path}; run `diffcast prepare` first")
    spec, sections, normalizer, _meta = storage.load_patch_cache(cache_path)
    if spec != cfg.patch:
        raise ConfigError(
            f"cache was prepared for patch spec {spec.to_dict()}, config says {cfg.patch.to_dict()}"
        )
    schedule = cfg.schedule.build()
    params, history = diffusion.train(
        sections["train"],
        spec,
        schedule,
        cfg.denoiser,
        cfg.training,
        val_patches=sections.get("val"),
        log=lambda row: print(
            f"epoch {row['epoch']:4d}  train_loss {row['train_loss']:.6f}"
            + ("" if math.isnan(row["val_loss"]) else f"  val_loss {row['val_loss']:.6f}")
        ),
    )
    n = len(sections["train"])
    steps = cfg.training.epochs * ((n + cfg.training.batch_size - 1) // cfg.training.batch_size)
    storage.save_checkpoint(
        out / "checkpoint.ckpt",
        params,
        schedule_params=cfg.schedule.to_dict(),
        normalizer=normalizer,
        spec=spec,
        train_steps=steps,
    )
    _write_loss_log(out / "loss_log.csv", history)
    _write_resolved(cfg, out)
    print(f"trained {steps} steps -> {out / 'checkpoint.ckpt'}")
    return 0


def _day_seed(root: int, day: np.datetime64) -> int:
    ordinal = int(day.astype("datetime64[D]").astype("int64"))
    return int(np.random.SeedSequence([root & 0xFFFFFFFF, ordinal & 0xFFFFFFFF]).generate_state(1)[0])


def _forecast_days(params, series, spec, normalizer, schedule, days, root_seed, num_samples, threshold):
    """CSV-ready rows (timestamp, true, forecast[, stddev]) for full days."""
    rows = []
    for day in days:
        fc, sd = diffusion.forecast_day(
            params,
            series,
            spec,
            day,
            normalizer,
            schedule,
            seed=_day_seed(root_seed, day),
            daylight_threshold=threshold,
            num_samples=num_samples,
        )
        i0 = data_mod.day_start_index(series, day)
        truth = series.values[i0 : i0 + 24, series.power_index]
        for h in range(24):
            ts = str(series.timestamps[i0 + h]).replace("T", " ")
            row = [ts, _g(truth[h]), _g(fc[h])]
            if sd is not None:
                row.append(_g(sd[h]))
            rows.append(row)
    return rows


def _write_forecast_csv(path, rows, with_std: bool) -> None:
    header = "timestamp,true,forecast" + (",stddev" if with_std else "")
    Path(path).write_text("\n".join([header] + [",".join(r) for r in rows]) + "\n")


def _date_range(start: str, end: str) -> list[np.datetime64]:
    try:
        d0 = np.datetime64(start, "D")
        d1 = np.datetime64(end, "D")
    except ValueError as exc:
        raise ConfigError(f"bad date: {exc}") from None
    if d1 < d0:
        raise ConfigError(f"end date {end} before start date {start}")
    return list(np.arange(d0, d1 + np.timedelta64(1, "D")))


def cmd_forecast(args) -> int:
    cfg = _load_cfg(args)
    out = _ensure_out(args)
    ckpt = storage.load_checkpoint(args.checkpoint)
    if ckpt.normalizer is None or ckpt.spec is None:
        raise ConfigError(f"{args.checkpoint}: checkpoint lacks normalizer or patch spec")
    series = _load_series(cfg)
    days = _date_range(args.start, args.end)
    rows = _forecast_days(
        ckpt.params,
        series,
        ckpt.spec,
        ckpt.normalizer,
        ckpt.schedule,
        days,
        cfg.forecast.seed,
        cfg.forecast.num_samples,
        cfg.data.daylight_threshold,
    )
    _write_forecast_csv(out / "forecast.csv", rows, cfg.forecast.num_samples > 1)
    _write_resolved(cfg, out)
    print(f"forecast {len(days)} day(s) -> {out / 'forecast.csv'}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    out = _ensure_out(args)
    series = _load_series(cfg)
    fpath = Path(args.forecast)
    if not fpath.exists():
        raise ConfigError(f"forecast CSV not found: {fpath}")
    days = sorted({ts.astype("datetime64[D]") for ts, _, _ in metrics.read_forecast_csv(fpath)})
    daylight = {
        day: data_mod.daylight_mask(series, day, cfg.data.daylight_threshold) for day in days
    }
    report = metrics.evaluate(
        fpath, series, daylight, horizon=cfg.patch.target_rows, pooled=args.pooled
    )
    (out / "report.csv").write_text(report.to_csv_text())
    (out / "report.json").write_text(report.to_json_text())
    _write_resolved(cfg, out)
    a = report.aggregate
    print(
        f"evaluated {len(report.days)} day(s): pearson {a.pearson:.4f}  "
        f"mape {a.mape_pct:.2f}%  rmse {a.rmse:.4f} -> {out / 'report.csv'}"
    )
    return 0


def _eval_day_candidates(series, spec, test_range) -> list[np.datetime64]:
    """Full calendar days inside the test range with a full preceding day and
    enough history for the conditioning window."""
    lo, hi = test_range
    days = []
    all_days = np.unique(series.timestamps[lo:hi].astype("datetime64[D]"))
    for day in all_days:
        try:
            i0 = data_mod.day_start_index(series, day)
            data_mod.day_start_index(series, day - np.timedelta64(1, "D"))
        except DataError:
            continue
        if i0 < lo or i0 + 24 > hi or i0 - spec.cond_rows < 0:
            continue
        days.append(day)
    return days


def _run_ablation_experiment(payload) -> dict:
    index, exp, cfg, out_dir = payload
    geometry = {
        "experiment": index + 1,
        "feature_count": exp.get("feature_count"),
        "image_side": f"{exp.get('image_side')}x{exp.get('image_side')}",
        "window_rows": exp.get("window_rows"),
        "pad_rows": exp.get("image_side", 0) - exp.get("window_rows", 0),
        "pad_cols": exp.get("image_side", 0) - exp.get("feature_count", 0),
        "cond_rows": exp.get("cond_rows"),
        "target_rows": exp.get("target_rows"),
    }
    row = dict(
        geometry,
        total_features="",
        pearson=float("nan"),
        mape_frac=float("nan"),
        rmse=float("nan"),
        error="",
    )
    try:
        spec = PatchSpec.from_dict(exp)
        exp_cfg = dataclasses.replace(
            cfg,
            patch=spec,
            denoiser=dataclasses.replace(cfg.denoiser, image_side=spec.image_side),
        )
        series = _load_series(exp_cfg)
        row["total_features"] = series.feature_count
        sections, normalizer, ranges = _prepare_sections(series, exp_cfg)
        schedule = exp_cfg.schedule.build()
        params, _history = diffusion.train(
            sections["train"],
            spec,
            schedule,
            exp_cfg.denoiser,
            exp_cfg.training,
            val_patches=sections.get("val"),
        )
        days = _eval_day_candidates(series, spec, ranges[2])
        if not days:
            raise DataError("no evaluable days in the test split")
        days = days[-exp_cfg.ablate.eval_days :]
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        storage.save_checkpoint(
            out / "checkpoint.ckpt",
            params,
            schedule_params=exp_cfg.schedule.to_dict(),
            normalizer=normalizer,
            spec=spec,
        )
        rows = _forecast_days(
            params,
            series,
            spec,
            normalizer,
            schedule,
            days,
            exp_cfg.forecast.seed,
            exp_cfg.forecast.num_samples,
            exp_cfg.data.daylight_threshold,
        )
        fpath = out / "forecast.csv"
        _write_forecast_csv(fpath, rows, exp_cfg.forecast.num_samples > 1)
        daylight = {
            day: data_mod.daylight_mask(series, day, exp_cfg.data.daylight_threshold)
            for day in days
        }
        report = metrics.evaluate(fpath, series, daylight, horizon=spec.target_rows)
        (out / "report.csv").write_text(report.to_csv_text())
        (out / "report.json").write_text(report.to_json_text())
        row["pearson"] = report.aggregate.pearson
        row["mape_frac"] = report.aggregate.mape_frac
        row["rmse"] = report.aggregate.rmse
    except Exception as exc:  # keep the grid going; the row records the failure
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


_ABLATION_COLUMNS = [
    "experiment",
    "total_features",
    "feature_count",
    "image_side",
    "window_rows",
    "pad_rows",
    "pad_cols",
    "cond_rows",
    "target_rows",
    "pearson",
    "mape_frac",
    "rmse",
    "error",
]


def _ablation_csv(rows) -> str:
    lines = [",".join(_ABLATION_COLUMNS)]
    for row in rows:
        cells = []
        for col in _ABLATION_COLUMNS:
            v = row[col]
            cells.append(_g(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _ablation_plots(out: Path, rows) -> None:
    ok = [r for r in rows if not r["error"] and math.isfinite(r["pearson"])]
    strategies: dict[str, list] = {}
    for r in ok:
        key = f"{r['feature_count']}f {r['image_side']} w{r['window_rows']}"
        strategies.setdefault(key, []).append(r)
    for metric, fname, ylab in (
        ("pearson", "pearson_vs_horizon.svg", "Pearson"),
        ("mape_frac", "mape_vs_horizon.svg", "MAPE (fraction)"),
        ("rmse", "rmse_vs_horizon.svg", "RMSE"),
    ):
        series = []
        for key, rs in strategies.items():
            rs = sorted(rs, key=lambda r: r["target_rows"])
            series.append((key, [r["target_rows"] for r in rs], [r[metric] for r in rs]))
        plots.line_plot_svg(
            out / fname,
            series,
            title=f"{ylab} vs prediction horizon",
            xlabel="target rows",
            ylabel=ylab,
        )
    series = []
    for key, rs in strategies.items():
        rs = sorted(rs, key=lambda r: r["cond_rows"])
        series.append((key, [r["cond_rows"] for r in rs], [r["pearson"] for r in rs]))
    plots.line_plot_svg(
        out / "pearson_vs_cond_rows.svg",
        series,
        title="Pearson vs conditioning rows",
        xlabel="conditioning rows",
        ylabel="Pearson",
    )


def cmd_ablate(args) -> int:
    cfg = _load_cfg(args)
    out = _ensure_out(args)
    experiments = list(cfg.ablate.experiments)
    payloads = [
        (i, exp, cfg, str(out / f"exp{i + 1:02d}")) for i, exp in enumerate(experiments)
    ]
    if args.parallel and args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(_run_ablation_experiment, payloads))
    else:
        rows = [_run_ablation_experiment(p) for p in payloads]
    (out / "ablation.csv").write_text(_ablation_csv(rows))
    _ablation_plots(out, rows)
    _write_resolved(cfg, out)
    failures = [r for r in rows if r["error"]]
    print(f"ablation: {len(rows) - len(failures)}/{len(rows)} experiments ok -> {out / 'ablation.csv'}")
    for r in failures:
        print(f"  experiment {r['experiment']} failed: {r['error']}", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    rows, identical = bench_mod.run_benchmark(args.repeats)
    print(bench_mod.format_table(rows, identical))
    if args.csv:
        backends = [k for k in rows[0] if k != "case"]
        lines = ["case," + ",".join(backends)]
        for row in rows:
            lines.append(row["case"] + "," + ",".join(_g(row[b]) for b in backends))
        Path(args.csv).write_text("\n".join(lines) + "\n")
    return 0


def cmd_synth(args) -> int:
    synthetic.write_synthetic_csv(args.out_csv, args.rows, features=args.features, seed=args.seed)
    print(f"wrote {args.rows} rows x {args.features} features -> {args.out_csv}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="diffcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, *, config=True, out=True):
        p = sub.add_parser(name, help=help_text)
        if config:
            p.add_argument("--config", required=True, help="TOML experiment config")
            p.add_argument("--seed", type=int, default=None, help="override config seeds")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=func)
        return p

    add("prepare", cmd_prepare, "build the normalized patch cache")
    p = add("train", cmd_train, "train the denoiser on a patch cache")
    p.add_argument("--cache", default=None, help="patch cache path (default <out>/cache.bin)")
    p = add("forecast", cmd_forecast, "forecast a date range with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--start", required=True, help="first day (YYYY-MM-DD)")
    p.add_argument("--end", required=True, help="last day, inclusive (YYYY-MM-DD)")
    p = add("evaluate", cmd_evaluate, "score a forecast CSV against the series")
    p.add_argument("--forecast", required=True, help="forecast CSV path")
    p.add_argument("--pooled", action="store_true", help="also report pooled metrics")
    p = add("ablate", cmd_ablate, "run the ablation grid")
    p.add_argument("--parallel", type=int, default=1, metavar="N")
    p = add("bench", cmd_bench, "benchmark kernel backends", config=False, out=False)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--csv", default=None, help="also write timings to CSV")
    p = add("synth", cmd_synth, "write a synthetic hourly CSV", config=False, out=False)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--rows", type=int, default=2400)
    p.add_argument("--features", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
