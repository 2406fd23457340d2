"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class DiffcastError(Exception):
    pass


class ConfigError(DiffcastError):
    """Invalid configuration or usage."""


class DataError(DiffcastError):
    """Malformed or inconsistent input data."""


class NumericalError(DiffcastError):
    """Numerical failure during training or sampling."""


class DivergenceError(NumericalError):
    """Loss or an intermediate tensor became non-finite."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
