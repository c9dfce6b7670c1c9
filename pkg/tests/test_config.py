import json

import pytest

from bubblegram import config as cfgmod
from bubblegram.errors import ArgumentError


def test_defaults_round_trip():
    cfg = cfgmod.AnalysisConfig()
    assert cfgmod.loads(cfgmod.dumps(cfg)) == cfg


def test_parse_serialize_parse():
    text = json.dumps({
        "constants": {"gamma": 1.33, "depth_m": 2.5},
        "filter": {"enabled": True, "low_cut_hz": 100.0, "mode": "causal"},
        "grid": {"r_min_mm": 0.3, "n_time": 200, "radius_spacing": "logarithmic", "t_max_s": 0.8},
        "window_s": 0.025,
        "engine": "approximate",
        "detect": {"min_prominence": 12.0},
        "render": {"colormap": "magma", "width_px": 1000},
    })
    first = cfgmod.loads(text)
    assert cfgmod.loads(cfgmod.dumps(first)) == first
    assert first.constants.gamma == 1.33 and first.constants.depth == 2.5
    assert first.filter_enabled and first.filter.low_cut == 100.0
    assert first.grid.radius_spacing == "logarithmic"
    assert first.render.width == 1000


def test_init_embeds_full_precision_defaults():
    d = json.loads(cfgmod.dumps(cfgmod.AnalysisConfig()))
    assert d["constants"] == {
        "gamma": 1.4, "p0_pa": 101325.0, "rho0_kg_m3": 998.0, "depth_m": 0.0, "decay_unit": "hz",
    }
    assert d["grid"]["r_min_mm"] == 0.2 and d["grid"]["n_radius"] == 500
    assert d["engine"] == "exact" and d["version"] == 1


@pytest.mark.parametrize(
    "doc",
    [
        {"colour": 1},
        {"constants": {"gamma": 1.4, "g": 9.8}},
        {"filter": {"q": 2}},
        {"grid": {"n_times": 3}},
        {"detect": {"min_prom": 1}},
        {"render": {"dpi": 100}},
    ],
)
def test_unknown_keys_rejected(doc):
    with pytest.raises(ArgumentError, match="unknown"):
        cfgmod.from_dict(doc)


@pytest.mark.parametrize(
    "doc",
    [
        {"engine": "fast"},
        {"onset": "edge"},
        {"data_span": "all"},
        {"window_s": -1.0},
        {"constants": {"gamma": 0.5}},
        {"filter": {"low_cut_hz": 5000.0}},
        {"render": {"clip_low_pct": 99, "clip_high_pct": 1}},
        {"detect": {"min_prominence": -3}},
        {"version": 7},
        {"constants": []},
    ],
)
def test_out_of_range_rejected(doc):
    with pytest.raises(ArgumentError):
        cfgmod.from_dict(doc)


def test_bad_json_and_missing_file(tmp_path):
    with pytest.raises(ArgumentError, match="not valid JSON"):
        cfgmod.loads("{")
    with pytest.raises(ArgumentError, match="cannot read"):
        cfgmod.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"engine": "x"}')
    with pytest.raises(ArgumentError, match=str(bad)):
        cfgmod.load(bad)


def test_env_var(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"engine": "approximate"}))
    monkeypatch.setenv(cfgmod.ENV_VAR, str(p))
    assert cfgmod.load().engine == "approximate"
    monkeypatch.delenv(cfgmod.ENV_VAR)
    assert cfgmod.load().engine == "exact"


def test_grid_resolution():
    g = cfgmod.GridConfig().resolve(0.0, 0.99998)
    assert (g.t_min, g.t_max) == (0.0, 0.99998)
    assert g.r_min == pytest.approx(0.2e-3) and g.r_max == pytest.approx(2e-3)
    g = cfgmod.GridConfig(t_min_s=0.1, t_max_s=0.5).resolve(0.0, 1.0)
    assert (g.t_min, g.t_max) == (0.1, 0.5)


def test_separation_units():
    cfg = cfgmod.AnalysisConfig(detect=cfgmod.DetectConfig(1.0, 0.004, 0.05))
    assert cfg.separation() == pytest.approx((0.004, 5e-5))
