"""On-disk containers: named float32 tensors plus a JSON header.

Layout: 8-byte magic, little-endian uint64 header length, JSON header
(metadata and a tensor index with names, shapes, and offsets), then the raw
little-endian float32 payload. Writing is deterministic: tensors are stored
in sorted name order and the JSON is dumped with sorted keys, so identical
inputs produce identical bytes. Used for both the patch cache and model
checkpoints.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .data import Normalizer
from .denoiser import DenoiserConfig, DenoiserParams
from .errors import ConfigError, DataError
from .patching import PatchSpec
from .schedule import NoiseSchedule, make_linear_schedule

MAGIC = b"DCAST01\n"


def save_tensors(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    names = sorted(tensors)
    index = []
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"meta": meta, "tensors": index}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DataError(f"{path}: not a diffcast tensor container")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=start)
        tensors[entry["name"]] = arr.reshape(shape).copy()
    return tensors, header["meta"]


# -- patch cache ---------------------------------------------------------


def save_patch_cache(
    path,
    spec: PatchSpec,
    sections: dict[str, np.ndarray],
    normalizer: Normalizer,
    extra: dict | None = None,
) -> None:
    meta = {
        "format": "patch_cache",
        "spec": spec.to_dict(),
        "normalizer": normalizer.to_dict(),
        "sections": {k: list(v.shape) for k, v in sections.items()},
    }
    if extra:
        meta.update(extra)
    save_tensors(path, sections, meta)


def load_patch_cache(path):
    tensors, meta = load_tensors(path)
    if meta.get("format") != "patch_cache":
        raise DataError(f"{path}: not a patch cache")
    spec = PatchSpec.from_dict(meta["spec"])
    normalizer = Normalizer.from_dict(meta["normalizer"])
    return spec, tensors, normalizer, meta


# -- checkpoints ---------------------------------------------------------


@dataclass
class Checkpoint:
    params: DenoiserParams
    schedule: NoiseSchedule
    normalizer: Normalizer | None
    spec: PatchSpec | None
    train_steps: int
    meta: dict


def save_checkpoint(
    path,
    params: DenoiserParams,
    *,
    schedule_params: dict,
    normalizer: Normalizer | None = None,
    spec: PatchSpec | None = None,
    train_steps: int = 0,
    extra: dict | None = None,
) -> None:
    meta = {
        "format": "checkpoint",
        "denoiser": params.config.to_dict(),
        "schedule": schedule_params,
        "normalizer": None if normalizer is None else normalizer.to_dict(),
        "spec": None if spec is None else spec.to_dict(),
        "train_steps": train_steps,
    }
    if extra:
        meta.update(extra)
    save_tensors(path, dict(params.tensors), meta)


def load_checkpoint(path) -> Checkpoint:
    tensors, meta = load_tensors(path)
    if meta.get("format") != "checkpoint":
        raise DataError(f"{path}: not a checkpoint")
    config = DenoiserConfig.from_dict(meta["denoiser"])
    params = DenoiserParams(config, tensors)
    params.validate()
    sp = meta["schedule"]
    try:
        schedule = make_linear_schedule(
            int(sp["steps"]), float(sp["beta_start"]), float(sp["beta_end"])
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: incomplete schedule parameters: missing {exc}") from None
    normalizer = None if meta["normalizer"] is None else Normalizer.from_dict(meta["normalizer"])
    spec = None if meta["spec"] is None else PatchSpec.from_dict(meta["spec"])
    return Checkpoint(
        params=params,
        schedule=schedule,
        normalizer=normalizer,
        spec=spec,
        train_steps=int(meta.get("train_steps", 0)),
        meta=meta,
    )
