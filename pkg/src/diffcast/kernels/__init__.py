"""Convolution lowering kernels with a compiled core and a numpy fallback.

The backend is selected once at import time: the Cython extension is used
when available, otherwise the pure-numpy fallback. Selection can be forced
with the environment variable ``DIFFCAST_KERNELS`` set to ``compiled``,
``python``, or ``auto`` (default). Both backends return bit-identical
results; ``diffcast bench`` compares their speed.
"""

from __future__ import annotations

import os

from . import fallback as _fallback
from ..errors import ConfigError

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def _select_initial():
    requested = os.environ.get("DIFFCAST_KERNELS", "auto").lower()
    if requested == "auto":
        return _BACKENDS.get("compiled", _fallback)
    if requested not in ("python", "compiled"):
        raise ConfigError(f"DIFFCAST_KERNELS must be auto, python, or compiled, got {requested!r}")
    if requested not in _BACKENDS:
        raise ConfigError("DIFFCAST_KERNELS=compiled but the extension is not built")
    return _BACKENDS[requested]


_active = _select_initial()


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str):
    if name not in _BACKENDS:
        raise ConfigError(f"unknown kernel backend {name!r}; available: {available_backends()}")
    return _BACKENDS[name]


def active_backend() -> str:
    return _active.NAME


def use_backend(name: str) -> None:
    """Switch the active backend (used by tests and the benchmark)."""
    global _active
    _active = get_backend(name)


def im2col(x, k):
    return _active.im2col(x, k)


def col2im(cols, c, h, w, k):
    return _active.col2im(cols, c, h, w, k)
