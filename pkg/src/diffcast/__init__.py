"""diffcast: mask-guided conditional diffusion forecasting for multivariate
hourly time series, via inpainting of the future rows of 2-D patches."""

from . import kernels
from .data import (
    Normalizer,
    RawSeries,
    apply_night_zeroing,
    chrono_split,
    daylight_mask,
    fit_normalizer,
    load_csv,
)
from .denoiser import (
    DenoiserConfig,
    DenoiserParams,
    init_params,
    loss_and_grad,
    predict_noise,
    sinusoidal_time_embedding,
)
from .diffusion import (
    ForecastResult,
    TrainingConfig,
    forecast_day,
    forward_noise,
    sample_reverse,
    train,
)
from .metrics import MetricReport, evaluate, mae, mape, mse, pearson, rmse
from .patching import Patch, PatchSpec, build_mask, extract_patches, pad_patch, unpad
from .schedule import NoiseSchedule, coefficients_at, make_linear_schedule

__version__ = "0.1.0"
