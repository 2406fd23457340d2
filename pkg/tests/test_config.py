import pytest

from diffcast.config import (
    DEFAULT_ABLATION_GRID,
    dump_toml,
    load_config,
    parse_config,
)
from diffcast.errors import ConfigError

MINIMAL = """
[data]
csv = "series.csv"

[patch]
feature_count = 16
window_rows = 16
image_side = 16
cond_rows = 15
target_rows = 1
"""


def test_minimal_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(MINIMAL)
    cfg = load_config(p)
    assert cfg.patch.target_rows == 1
    assert cfg.schedule.steps == 1000
    assert cfg.denoiser.image_side == 16
    assert cfg.training.batch_size == 64
    assert cfg.forecast.num_samples == 1
    assert len(cfg.ablate.experiments) == 12


def test_default_grid_matches_published_layouts():
    rows = [
        (e["feature_count"], e["window_rows"], e["image_side"], e["cond_rows"], e["target_rows"])
        for e in DEFAULT_ABLATION_GRID
    ]
    assert rows == [
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


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(MINIMAL + "\n[training]\nlerning_rate = 0.1\n")
    with pytest.raises(ConfigError, match="lerning_rate"):
        load_config(p)


def test_missing_sections_rejected():
    with pytest.raises(ConfigError, match=r"\[data\]"):
        parse_config({"patch": {}})
    with pytest.raises(ConfigError, match="csv"):
        parse_config({"data": {}, "patch": {}})


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/nope.toml")


def test_dump_round_trip(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(MINIMAL + "\n[training]\nepochs = 3\nseed = 9\n")
    cfg = load_config(p)
    q = tmp_path / "resolved.toml"
    q.write_text(dump_toml(cfg))
    cfg2 = load_config(q)
    assert cfg2 == cfg
