import numpy as np
import pytest

from conftest import grid_specs
from diffcast.errors import ConfigError
from diffcast.patching import (
    PatchSpec,
    build_mask,
    extract_patch_array,
    extract_patches,
    pad_batch,
    pad_patch,
    unpad,
)

ROW1 = PatchSpec(window_rows=16, feature_count=16, image_side=16, cond_rows=15, target_rows=1)
ROW5 = PatchSpec(window_rows=25, feature_count=25, image_side=32, cond_rows=24, target_rows=1)


def test_spec_padding_fields():
    assert (ROW5.pad_rows, ROW5.pad_cols) == (7, 7)
    assert (ROW1.pad_rows, ROW1.pad_cols) == (0, 0)
    asym = PatchSpec(window_rows=32, feature_count=25, image_side=32, cond_rows=24, target_rows=8)
    assert (asym.pad_rows, asym.pad_cols) == (0, 7)


def test_spec_validation():
    with pytest.raises(ConfigError):
        PatchSpec(window_rows=16, feature_count=16, image_side=16, cond_rows=16, target_rows=0)
    with pytest.raises(ConfigError):
        PatchSpec(window_rows=16, feature_count=16, image_side=16, cond_rows=10, target_rows=4)
    with pytest.raises(ConfigError):
        PatchSpec(window_rows=40, feature_count=16, image_side=32, cond_rows=39, target_rows=1)
    with pytest.raises(ConfigError):  # side must be repeatedly divisible by 2
        PatchSpec(window_rows=10, feature_count=10, image_side=12, cond_rows=9, target_rows=1)


def test_all_grid_layouts_are_valid_specs():
    specs = grid_specs()
    assert len(specs) == 12
    for spec in specs:
        assert spec.cond_rows + spec.target_rows == spec.window_rows
        assert spec.pad_rows >= 0 and spec.pad_cols >= 0


def test_extract_patch_counts(rng):
    seg = rng.standard_normal((100, 16))
    patches = extract_patches(seg, ROW1)
    assert len(patches) == 100 - 16 + 1
    assert patches[3].origin == 3
    assert np.array_equal(patches[3].values, seg[3:19])

    only = extract_patches(rng.standard_normal((16, 16)), ROW1)
    assert len(only) == 1
    with pytest.raises(ConfigError):
        extract_patches(rng.standard_normal((15, 16)), ROW1)


def test_extract_patch_count_long_series():
    # L - m + 1, cross-checked by brute-force enumeration on a tiny series
    seg = np.zeros((50375, 16), dtype=np.float32)
    assert extract_patch_array(seg, ROW1).shape[0] == 50360
    tiny = np.arange(40).reshape(20, 2).astype(float)
    spec = PatchSpec(window_rows=16, feature_count=2, image_side=16, cond_rows=15, target_rows=1)
    arr = extract_patch_array(tiny, spec)
    brute = [tiny[k : k + 16] for k in range(0, 20 - 16 + 1)]
    assert arr.shape[0] == len(brute)
    for k, b in enumerate(brute):
        assert np.array_equal(arr[k], b)


def test_consecutive_patches_share_rows_bitwise(rng):
    seg = rng.standard_normal((60, 16)).astype(np.float32)
    arr = extract_patch_array(seg, ROW1)
    for k in range(arr.shape[0] - 1):
        assert np.array_equal(arr[k][1:], arr[k + 1][:-1])


def test_pad_patch_geometry(rng):
    p = rng.standard_normal((25, 25)).astype(np.float32)
    img = pad_patch(p, ROW5)
    assert img.shape == (32, 32)
    assert np.array_equal(img[:25, :25], p)
    assert not img[25:, :].any() and not img[:, 25:].any()

    q = rng.standard_normal((16, 16)).astype(np.float32)
    assert np.array_equal(pad_patch(q, ROW1), q)  # no-op when pad is zero

    asym = PatchSpec(window_rows=32, feature_count=25, image_side=32, cond_rows=24, target_rows=8)
    r = rng.standard_normal((32, 25)).astype(np.float32)
    img = pad_patch(r, asym)
    assert np.array_equal(img[:, :25], r) and not img[:, 25:].any()

    with pytest.raises(ConfigError):
        pad_patch(rng.standard_normal((10, 25)), ROW5)


def test_unpad_round_trip(rng):
    for spec in grid_specs():
        p = rng.standard_normal((spec.window_rows, spec.feature_count)).astype(np.float32)
        assert np.array_equal(unpad(pad_patch(p, spec), spec), p)


def test_unpad_discards_padding_garbage(rng):
    p = rng.standard_normal((25, 25)).astype(np.float32)
    img = pad_patch(p, ROW5)
    img[30, 30] = 7.0
    img[2, 28] = -3.0
    assert np.array_equal(unpad(img, ROW5), p)


def test_pad_batch_matches_pad_patch(rng):
    stack = rng.standard_normal((5, 25, 25)).astype(np.float32)
    batch = pad_batch(stack, ROW5)
    for i in range(5):
        assert np.array_equal(batch[i], pad_patch(stack[i], ROW5))


def test_mask_sums():
    m5 = build_mask(ROW5)
    assert int(m5.sum()) == 1 * 25
    row4 = PatchSpec(window_rows=16, feature_count=16, image_side=16, cond_rows=8, target_rows=8)
    assert int(build_mask(row4).sum()) == 8 * 16


@pytest.mark.parametrize("spec", grid_specs(), ids=lambda s: f"{s.feature_count}f-m{s.window_rows}-t{s.target_rows}")
def test_mask_structure(spec):
    m = build_mask(spec)
    assert m.shape == (spec.image_side, spec.image_side)
    assert int(m.sum()) == spec.target_rows * spec.feature_count
    # ones exactly on target rows x real feature columns
    assert m[spec.cond_rows : spec.window_rows, : spec.feature_count].all()
    assert not m[: spec.cond_rows].any()
    # never on padding
    assert not m[spec.window_rows :, :].any()
    assert not m[:, spec.feature_count :].any()
