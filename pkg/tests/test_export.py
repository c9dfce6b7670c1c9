import json

import numpy as np
import pytest

from bubblegram import Bubblegram, BubblegramError, GridSpec, RadiusDensity
from bubblegram.engine import radius_weights
from bubblegram.errors import ArgumentError
from bubblegram.export import (
    FORMAT_TAG,
    bubblegram_csv,
    export_bubblegram,
    read_bubblegram,
    read_bubblegram_csv,
    read_radius_density_csv,
    write_bubblegram_binary,
    write_bubblegram_csv,
    write_json,
    write_radius_density_csv,
)


def make_bubblegram(seed=0, shape=(7, 5), spacing="linear", masked=False):
    rng = np.random.default_rng(seed)
    grid = GridSpec(0.1, 0.9, 0.2e-3, 2e-3, shape[0], shape[1], radius_spacing=spacing)
    values = rng.normal(size=shape) * 1e4 - 3e5
    mask = np.ones(shape, bool)
    if masked:
        mask[-1] = False
        values[~mask] = values[mask].min() - 1.0
    return Bubblegram(grid, values, mask, 1449, {"engine": "exact", "window_s": 0.0301875})


def significant_equal(a, b, digits=9):
    scale = np.maximum(np.abs(a), np.abs(b))
    return np.all(np.abs(a - b) <= 0.5 * 10.0 ** (1 - digits) * scale)


def test_csv_round_trip_nine_digits(tmp_path):
    b = make_bubblegram()
    p = tmp_path / "b.csv"
    write_bubblegram_csv(b, p)
    back = read_bubblegram_csv(p)
    assert back.grid == b.grid
    assert significant_equal(back.values, b.values)
    assert back.mask.all()


def test_csv_layout():
    text = bubblegram_csv(make_bubblegram(shape=(3, 2)))
    lines = text.splitlines()
    assert lines[0].startswith("# bubblegram")
    assert lines[1].startswith("time_s\\radius_m,0.0002")
    assert len(lines) == 5
    assert lines[2].split(",")[0] == "0.1"


def test_csv_sentinel_restores_mask(tmp_path):
    b = make_bubblegram(masked=True)
    p = tmp_path / "m.csv"
    write_bubblegram_csv(b, p)
    assert "# sentinel=" in p.read_text()
    back = read_bubblegram(p)
    np.testing.assert_array_equal(back.mask, b.mask)


def test_csv_log_axis_inferred(tmp_path):
    b = make_bubblegram(spacing="logarithmic")
    p = tmp_path / "g.csv"
    write_bubblegram_csv(b, p)
    back = read_bubblegram_csv(p)
    assert back.grid.radius_spacing == "logarithmic"
    np.testing.assert_allclose(back.radii, b.radii, rtol=1e-15)


def test_binary_round_trip_exact(tmp_path):
    b = make_bubblegram(masked=True)
    data, side = write_bubblegram_binary(b, tmp_path / "bin")
    assert data.stat().st_size == 8 * b.values.size
    meta = json.loads(side.read_text())
    assert meta["format"] == FORMAT_TAG and meta["shape"] == [7, 5]
    for path in (side, data):
        back = read_bubblegram(path)
        assert back.values.tobytes() == b.values.tobytes()
        np.testing.assert_array_equal(back.mask, b.mask)
        assert back.grid == b.grid and back.window_len == 1449
        assert back.metadata["engine"] == "exact"


def test_binary_size_mismatch(tmp_path):
    b = make_bubblegram()
    data, side = write_bubblegram_binary(b, tmp_path / "bin")
    data.write_bytes(data.read_bytes()[:-8])
    with pytest.raises(BubblegramError, match="expected 280"):
        read_bubblegram(side)


def test_bad_inputs(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# nothing\n")
    with pytest.raises(BubblegramError, match="no bubblegram"):
        read_bubblegram_csv(p)
    p.write_text("time_s\\radius_m,1e-3,2e-3\n0.0,1,x\n")
    with pytest.raises(BubblegramError, match=":2:"):
        read_bubblegram_csv(p)
    p.write_text("time_s\\radius_m,1e-3,2e-3\n0.0,1\n")
    with pytest.raises(BubblegramError, match="columns"):
        read_bubblegram_csv(p)
    with pytest.raises(ArgumentError):
        read_bubblegram(tmp_path / "b.txt")
    side = tmp_path / "other.json"
    side.write_text('{"format": "nope"}')
    with pytest.raises(BubblegramError, match="not a"):
        read_bubblegram(side)


def test_export_formats(tmp_path):
    b = make_bubblegram()
    paths = export_bubblegram(b, tmp_path / "out", ("csv", "binary", "image", "raster"))
    names = sorted(p.name for p in paths)
    assert names == ["out.csv", "out.f64", "out.json", "out.png", "out_raster.png"]
    assert all(p.stat().st_size > 0 for p in paths)
    with pytest.raises(ArgumentError):
        export_bubblegram(b, tmp_path / "out", ("tiff",))


def test_unwritable_path(tmp_path):
    b = make_bubblegram()
    with pytest.raises(BubblegramError, match="missing"):
        write_bubblegram_csv(b, tmp_path / "missing" / "b.csv")
    with pytest.raises(BubblegramError, match="missing"):
        write_json({"a": 1}, tmp_path / "missing" / "a.json")


def test_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        write_json({"a": float("nan")}, tmp_path / "a.json")


def test_radius_density_csv(tmp_path):
    r = np.linspace(0.2e-3, 2e-3, 11)
    w = radius_weights(r)
    d = np.linspace(1, 2, 11)
    d = d / (d @ w)
    p = tmp_path / "d.csv"
    write_radius_density_csv(RadiusDensity(r, d, w), p)
    assert p.read_text().splitlines()[0] == "radius_mm,density_per_mm,weight_mm"
    back = read_radius_density_csv(p)
    np.testing.assert_allclose(back.radii, r, rtol=1e-15)
    np.testing.assert_allclose(back.density, d, rtol=1e-15)
    assert back.total() == pytest.approx(1.0, abs=1e-12)
