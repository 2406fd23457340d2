"""Experiment configuration: TOML sections mapped onto module configs.

A run is reproducible from its config alone; every CLI command copies the
resolved config into its output directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .denoiser import DenoiserConfig
from .diffusion import TrainingConfig
from .errors import ConfigError
from .patching import PatchSpec
from .schedule import NoiseSchedule, make_linear_schedule

# The default ablation grid: the twelve window/padding/partition layouts.
DEFAULT_ABLATION_GRID: tuple[dict, ...] = tuple(
    {
        "feature_count": f,
        "window_rows": m,
        "image_side": s,
        "cond_rows": c,
        "target_rows": t,
    }
    for f, m, s, c, t in [
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
)


@dataclass(frozen=True)
class DataConfig:
    csv: str
    timestamp_column: str = "timestamp"
    power_column: str = "power"
    radiation_column: str = "radiation"
    timestamp_format: str | None = None
    ignore_columns: tuple[str, ...] = ()
    split_fractions: tuple[float, ...] = (0.7, 0.1, 0.2)
    daylight_threshold: float = 0.0
    forward_fill: bool = False


@dataclass(frozen=True)
class ScheduleConfig:
    steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def build(self) -> NoiseSchedule:
        return make_linear_schedule(self.steps, self.beta_start, self.beta_end)

    def to_dict(self) -> dict:
        return {"steps": self.steps, "beta_start": self.beta_start, "beta_end": self.beta_end}


@dataclass(frozen=True)
class ForecastConfig:
    num_samples: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 1:
            raise ConfigError("num_samples must be >= 1")


@dataclass(frozen=True)
class AblateConfig:
    eval_days: int = 5
    experiments: tuple[dict, ...] = DEFAULT_ABLATION_GRID


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig
    patch: PatchSpec
    schedule: ScheduleConfig
    denoiser: DenoiserConfig
    training: TrainingConfig
    forecast: ForecastConfig
    ablate: AblateConfig = field(default_factory=AblateConfig)


_SECTION_KEYS = {
    "data": {
        "csv",
        "timestamp_column",
        "power_column",
        "radiation_column",
        "timestamp_format",
        "ignore_columns",
        "split_fractions",
        "daylight_threshold",
        "forward_fill",
    },
    "patch": {"feature_count", "window_rows", "image_side", "cond_rows", "target_rows"},
    "schedule": {"steps", "beta_start", "beta_end"},
    "denoiser": {"base_channels", "depth", "time_embed_dim", "norm_groups"},
    "training": {"epochs", "batch_size", "learning_rate", "seed", "val_every"},
    "forecast": {"num_samples", "seed"},
    "ablate": {"eval_days", "experiments"},
}


def _section(doc: dict, name: str, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return {}
    unknown = set(sec) - _SECTION_KEYS[name]
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return dict(sec)


def parse_config(doc: dict) -> ExperimentConfig:
    unknown = set(doc) - set(_SECTION_KEYS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    d = _section(doc, "data")
    if "csv" not in d:
        raise ConfigError("[data] must set csv")
    if "ignore_columns" in d:
        d["ignore_columns"] = tuple(d["ignore_columns"])
    if "split_fractions" in d:
        d["split_fractions"] = tuple(float(f) for f in d["split_fractions"])
    data = DataConfig(**d)

    p = _section(doc, "patch")
    try:
        patch = PatchSpec.from_dict(p)
    except KeyError as exc:
        raise ConfigError(f"[patch] missing key {exc}") from None

    schedule = ScheduleConfig(**_section(doc, "schedule", required=False))
    den = _section(doc, "denoiser", required=False)
    denoiser = DenoiserConfig(image_side=patch.image_side, **{k: int(v) for k, v in den.items()})

    t = _section(doc, "training", required=False)
    training = TrainingConfig(
        epochs=int(t.get("epochs", 10)),
        batch_size=int(t.get("batch_size", 64)),
        learning_rate=float(t.get("learning_rate", 1e-3)),
        seed=int(t.get("seed", 0)),
        val_every=int(t.get("val_every", 0)),
    )
    forecast = ForecastConfig(**_section(doc, "forecast", required=False))

    a = _section(doc, "ablate", required=False)
    ablate = AblateConfig(
        eval_days=int(a.get("eval_days", 5)),
        experiments=tuple(a.get("experiments", DEFAULT_ABLATION_GRID)),
    )
    return ExperimentConfig(
        data=data,
        patch=patch,
        schedule=schedule,
        denoiser=denoiser,
        training=training,
        forecast=forecast,
        ablate=ablate,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    return parse_config(doc)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)} to TOML")


def dump_toml(cfg: ExperimentConfig) -> str:
    """Resolved config as TOML text (the copy written into output dirs)."""
    sections: list[tuple[str, dict]] = [
        (
            "data",
            {
                "csv": cfg.data.csv,
                "timestamp_column": cfg.data.timestamp_column,
                "power_column": cfg.data.power_column,
                "radiation_column": cfg.data.radiation_column,
                **(
                    {"timestamp_format": cfg.data.timestamp_format}
                    if cfg.data.timestamp_format
                    else {}
                ),
                **(
                    {"ignore_columns": list(cfg.data.ignore_columns)}
                    if cfg.data.ignore_columns
                    else {}
                ),
                "split_fractions": list(cfg.data.split_fractions),
                "daylight_threshold": cfg.data.daylight_threshold,
                "forward_fill": cfg.data.forward_fill,
            },
        ),
        ("patch", cfg.patch.to_dict()),
        ("schedule", cfg.schedule.to_dict()),
        (
            "denoiser",
            {
                "base_channels": cfg.denoiser.base_channels,
                "depth": cfg.denoiser.depth,
                "time_embed_dim": cfg.denoiser.time_embed_dim,
                "norm_groups": cfg.denoiser.norm_groups,
            },
        ),
        (
            "training",
            {
                "epochs": cfg.training.epochs,
                "batch_size": cfg.training.batch_size,
                "learning_rate": cfg.training.learning_rate,
                "seed": cfg.training.seed,
                "val_every": cfg.training.val_every,
            },
        ),
        ("forecast", {"num_samples": cfg.forecast.num_samples, "seed": cfg.forecast.seed}),
        ("ablate", {"eval_days": cfg.ablate.eval_days}),
    ]
    out = []
    for name, body in sections:
        out.append(f"[{name}]")
        for key, value in body.items():
            out.append(f"{key} = {_toml_value(value)}")
        out.append("")
    for exp in cfg.ablate.experiments:
        out.append("[[ablate.experiments]]")
        for key in ("feature_count", "window_rows", "image_side", "cond_rows", "target_rows"):
            out.append(f"{key} = {_toml_value(exp[key])}")
        out.append("")
    return "\n".join(out)
