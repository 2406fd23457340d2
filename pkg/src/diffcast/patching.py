"""2-D patch geometry: sliding windows, zero padding, and the condition/target mask.

A patch is a window_rows x feature_count slice of the normalized series,
treated as a single-channel image (rows = consecutive timesteps, columns =
features). Padding rows are appended at the bottom and padding columns at
the right so that row index stays the timestep offset and column index the
feature index. The binary mask marks the generated region: 1 on target rows
over real feature columns, 0 on conditioning rows and all padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PatchSpec:
    window_rows: int
    feature_count: int
    image_side: int
    cond_rows: int
    target_rows: int

    @property
    def pad_rows(self) -> int:
        return self.image_side - self.window_rows

    @property
    def pad_cols(self) -> int:
        return self.image_side - self.feature_count

    def __post_init__(self):
        s = self.image_side
        if s < 16 or s % 16 != 0:
            raise ConfigError(f"image_side must be a positive multiple of 16, got {s}")
        if self.cond_rows < 1 or self.target_rows < 1:
            raise ConfigError("cond_rows and target_rows must both be >= 1")
        if self.cond_rows + self.target_rows != self.window_rows:
            raise ConfigError(
                f"cond_rows + target_rows must equal window_rows "
                f"({self.cond_rows} + {self.target_rows} != {self.window_rows})"
            )
        if self.pad_rows < 0 or self.pad_cols < 0:
            raise ConfigError(
                f"window {self.window_rows}x{self.feature_count} does not fit "
                f"inside a {s}x{s} image"
            )

    def to_dict(self) -> dict:
        return {
            "window_rows": self.window_rows,
            "feature_count": self.feature_count,
            "image_side": self.image_side,
            "cond_rows": self.cond_rows,
            "target_rows": self.target_rows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatchSpec":
        return cls(
            window_rows=int(d["window_rows"]),
            feature_count=int(d["feature_count"]),
            image_side=int(d["image_side"]),
            cond_rows=int(d["cond_rows"]),
            target_rows=int(d["target_rows"]),
        )


@dataclass(frozen=True)
class Patch:
    """Consecutive stride-1 window of the source series (pre-padding)."""

    values: np.ndarray
    origin: int


def extract_patch_array(segment: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """All stride-1 windows of a (L, F) segment as a (L-m+1, m, F) view."""
    seg = np.asarray(segment)
    if seg.ndim != 2 or seg.shape[1] != spec.feature_count:
        raise ConfigError(
            f"segment must be 2-D with {spec.feature_count} columns, got {seg.shape}"
        )
    if seg.shape[0] < spec.window_rows:
        raise ConfigError(
            f"segment length {seg.shape[0]} shorter than window_rows {spec.window_rows}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(seg, spec.window_rows, axis=0)
    return windows.transpose(0, 2, 1)


def extract_patches(segment: np.ndarray, spec: PatchSpec) -> list[Patch]:
    """Stride-1 patches covering the segment; patch k spans rows [k, k+m)."""
    arr = extract_patch_array(segment, spec)
    return [Patch(values=arr[k], origin=k) for k in range(arr.shape[0])]


def pad_patch(patch: Patch | np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Embed the patch in the top-left of an S x S zero image."""
    values = patch.values if isinstance(patch, Patch) else np.asarray(patch)
    if values.shape != (spec.window_rows, spec.feature_count):
        raise ConfigError(
            f"patch shape {values.shape} does not match spec "
            f"({spec.window_rows}, {spec.feature_count})"
        )
    s = spec.image_side
    image = np.zeros((s, s), dtype=values.dtype)
    image[: spec.window_rows, : spec.feature_count] = values
    return image


def pad_batch(patches: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Vectorized pad_patch for a (P, m, F) stack; returns (P, S, S)."""
    patches = np.asarray(patches)
    if patches.ndim != 3 or patches.shape[1:] != (spec.window_rows, spec.feature_count):
        raise ConfigError(f"patch stack shape {patches.shape} does not match spec")
    s = spec.image_side
    images = np.zeros((patches.shape[0], s, s), dtype=patches.dtype)
    images[:, : spec.window_rows, : spec.feature_count] = patches
    return images


def unpad(image: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Recover the real window_rows x feature_count region, discarding padding."""
    image = np.asarray(image)
    s = spec.image_side
    if image.shape != (s, s):
        raise ConfigError(f"image shape {image.shape} does not match spec side {s}")
    return image[: spec.window_rows, : spec.feature_count].copy()


def build_mask(spec: PatchSpec) -> np.ndarray:
    """Binary S x S mask: 1 on target rows x real feature columns, 0 elsewhere."""
    s = spec.image_side
    mask = np.zeros((s, s), dtype=np.uint8)
    mask[spec.cond_rows : spec.window_rows, : spec.feature_count] = 1
    return mask
