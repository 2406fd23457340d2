import numpy as np
import pytest

from diffcast.data import (
    Normalizer,
    apply_night_zeroing,
    chrono_split,
    daylight_mask,
    fit_normalizer,
    load_csv,
)
from diffcast.errors import ConfigError, DataError
from diffcast.synthetic import write_synthetic_csv


def _write_csv(path, rows, header="timestamp,power,radiation,f0"):
    path.write_text("\n".join([header] + rows) + "\n")


def _hours(start, n):
    t0 = np.datetime64(start, "s")
    return [str(t0 + i * np.timedelta64(1, "h")).replace("T", " ") for i in range(n)]


def test_load_csv_shapes(tmp_path):
    p = tmp_path / "tiny.csv"
    hs = _hours("2020-01-01T00:00:00", 3)
    _write_csv(p, [f"{h},1.0,2.0,3.0" for h in hs])
    s = load_csv(p)
    assert (s.length, s.feature_count) == (3, 3)
    assert s.feature_names == ["power", "radiation", "f0"]
    assert (s.power_index, s.radiation_index) == (0, 1)


def test_load_csv_25_features(tmp_path):
    p = tmp_path / "wide.csv"
    names = ["power", "radiation"] + [f"v{i}" for i in range(23)]
    hs = _hours("2020-01-01T00:00:00", 3)
    rows = [h + "," + ",".join(["1.5"] * 25) for h in hs]
    _write_csv(p, rows, header="timestamp," + ",".join(names))
    s = load_csv(p)
    assert (s.length, s.feature_count) == (3, 25)


def test_load_csv_gap_names_row(tmp_path):
    p = tmp_path / "gap.csv"
    hs = _hours("2020-01-01T00:00:00", 4)
    hs[2] = hs[3]  # duplicate later hour -> gap after row 3
    _write_csv(p, [f"{h},1,2,3" for h in hs[:3]])
    with pytest.raises(DataError, match="row 4"):
        load_csv(p)


def test_load_csv_missing_column(tmp_path):
    p = tmp_path / "m.csv"
    _write_csv(p, ["2020-01-01 00:00:00,1,2"], header="timestamp,power,other")
    with pytest.raises(DataError, match="radiation"):
        load_csv(p)


def test_load_csv_bad_value_reports_row(tmp_path):
    p = tmp_path / "bad.csv"
    hs = _hours("2020-01-01T00:00:00", 2)
    _write_csv(p, [f"{hs[0]},1,2,3", f"{hs[1]},oops,2,3"])
    with pytest.raises(DataError, match="row 3"):
        load_csv(p)


def test_load_csv_forward_fill(tmp_path):
    p = tmp_path / "ff.csv"
    hs = _hours("2020-01-01T00:00:00", 3)
    _write_csv(p, [f"{hs[0]},1,2,3", f"{hs[1]},,2,3", f"{hs[2]},5,2,3"])
    with pytest.raises(DataError):
        load_csv(p)
    s = load_csv(p, forward_fill=True)
    assert s.values[1, 0] == 1.0


def test_normalizer_examples():
    nz = Normalizer(mins=np.array([0.0]), maxs=np.array([2.0]))
    assert nz.apply(np.array([1.0]))[0] == 0.0
    assert nz.apply(np.array([2.0]))[0] == 1.0
    assert nz.apply(np.array([0.0]))[0] == -1.0
    assert nz.invert(np.array([0.0]))[0] == 1.0


def test_normalizer_round_trip(rng):
    mins = rng.uniform(-5, 0, size=8)
    maxs = mins + rng.uniform(0.5, 10, size=8)
    nz = Normalizer(mins=mins, maxs=maxs)
    x = rng.uniform(mins, maxs, size=(1000, 8))
    back = nz.invert(nz.apply(x))
    assert np.abs(back - x).max() < 1e-9


def test_fit_normalizer_constant_feature_warns(tmp_path):
    values = np.column_stack([np.linspace(0, 1, 10), np.full(10, 3.0)])
    ts = np.datetime64("2020-01-01T00:00:00", "s") + np.arange(10) * np.timedelta64(1, "h")
    from diffcast.data import RawSeries

    series = RawSeries(
        timestamps=ts,
        values=values,
        feature_names=["a", "b"],
        power_index=0,
        radiation_index=1,
    )
    with pytest.warns(UserWarning, match="constant"):
        nz = fit_normalizer(series, (0, 10))
    assert np.all(nz.apply(values)[:, 1] == 0.0)


def _daynight_series(tmp_path, rows=96):
    p = tmp_path / "sun.csv"
    write_synthetic_csv(p, rows, features=4, seed=0)
    return load_csv(p)


def test_daylight_mask_from_preceding_day(tmp_path):
    s = _daynight_series(tmp_path)
    mask = daylight_mask(s, np.datetime64("2012-01-02"))
    rad_prev = s.values[0:24, s.radiation_index]
    assert np.array_equal(mask, rad_prev > 0)
    assert mask[12] and not mask[0]


def test_daylight_mask_first_day_errors(tmp_path):
    s = _daynight_series(tmp_path)
    with pytest.raises(DataError, match="skip"):
        daylight_mask(s, np.datetime64("2012-01-01"))


def test_daylight_mask_all_zero_radiation():
    from diffcast.data import RawSeries

    ts = np.datetime64("2020-01-01T00:00:00", "s") + np.arange(48) * np.timedelta64(1, "h")
    values = np.zeros((48, 2))
    s = RawSeries(timestamps=ts, values=values, feature_names=["p", "r"], power_index=0, radiation_index=1)
    assert not daylight_mask(s, np.datetime64("2020-01-02")).any()


def test_night_zeroing():
    assert np.array_equal(apply_night_zeroing(np.array([5.0, 5, 5]), [False, True, False]), [0, 5, 0])
    x = np.array([1.0, 2.0])
    assert np.array_equal(apply_night_zeroing(x, [True, True]), x)
    assert not apply_night_zeroing(x, [False, False]).any()
    with pytest.raises(DataError):
        apply_night_zeroing(np.zeros(3), [True, False])


def test_night_zeroing_idempotent(rng):
    x = rng.standard_normal(24)
    m = rng.random(24) > 0.5
    once = apply_night_zeroing(x, m)
    assert np.array_equal(apply_night_zeroing(once, m), once)


def test_chrono_split_small():
    assert chrono_split(10, (0.8, 0.1, 0.1)) == ((0, 8), (8, 9), (9, 10))


def test_chrono_split_gefcom_sizes():
    # arithmetic oracle: cumulative floor boundaries
    ranges = chrono_split(50375, (0.7, 0.1, 0.2))
    sizes = [hi - lo for lo, hi in ranges]
    assert sizes == [35262, 5038, 10075]
    assert ranges[0][0] == 0 and ranges[-1][1] == 50375
    for (a, b), (c, d) in zip(ranges, ranges[1:]):
        assert b == c  # contiguous partition


def test_chrono_split_errors():
    with pytest.raises(ConfigError):
        chrono_split(10, (0.8, 0.1))  # sums to 0.9
    with pytest.raises(ConfigError):
        chrono_split(10, (0.5, -0.1, 0.6))
    with pytest.raises(ConfigError):
        chrono_split(3, (0.05, 0.05, 0.9))  # degenerate empty range
