"""Bubblegram, spectrogram and density files.

Bubblegram CSV layout (SI units)::

    # bubblegram v1; rows: onset time index, columns: radius index
    # sentinel=-348545.9      (only when unsupported cells exist)
    time_s\\radius_m,2e-04,2.036e-04,...
    0,-348544.9,-348544.9,...
    ...

The binary form is a raw little-endian float64 C-order matrix ``<stem>.f64``
next to a JSON sidecar ``<stem>.json`` holding shape, axes and metadata.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from .engine import Bubblegram, GridSpec, RadiusDensity
from .errors import ArgumentError, BubblegramError
from .wavio import atomic_write_bytes

CSV_PRECISION = 9
FORMAT_TAG = "bubblegram-f64-v1"


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path):
    try:
        atomic_write_bytes(path, dumps_json(obj).encode())
    except OSError as exc:
        raise BubblegramError(f"{path}: cannot write: {exc.strerror or exc}") from exc


def _fmt(values, precision):
    return ",".join(f"{v:.{precision}g}" for v in values)


def _write_text(path, text: str):
    try:
        atomic_write_bytes(path, text.encode())
    except OSError as exc:
        raise BubblegramError(f"{path}: cannot write: {exc.strerror or exc}") from exc


def bubblegram_csv(b: Bubblegram, precision: int = CSV_PRECISION) -> str:
    buf = io.StringIO()
    buf.write("# bubblegram v1; rows: onset time index, columns: radius index\n")
    if not b.mask.all():
        buf.write(f"# sentinel={b.sentinel!r}\n")
    buf.write("time_s\\radius_m," + _fmt(b.radii, 17) + "\n")
    for t, row in zip(b.times, b.values):
        buf.write(f"{float(t)!r}," + _fmt(row, precision) + "\n")
    return buf.getvalue()


def write_bubblegram_csv(b: Bubblegram, path, precision: int = CSV_PRECISION):
    _write_text(path, bubblegram_csv(b, precision))


def read_bubblegram_csv(path) -> Bubblegram:
    """Load a bubblegram CSV. Axes must be linear or geometric as written."""
    sentinel = None
    header = None
    rows = []
    times = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# sentinel="):
                    sentinel = float(line.split("=", 1)[1])
                continue
            parts = line.split(",")
            try:
                if header is None:
                    header = np.array([float(x) for x in parts[1:]])
                else:
                    times.append(float(parts[0]))
                    rows.append([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise BubblegramError(f"{path}:{lineno}: {exc}") from exc
    if header is None or not rows:
        raise BubblegramError(f"{path}: no bubblegram data")
    values = np.array(rows, dtype=float)
    if values.shape[1] != header.size:
        raise BubblegramError(f"{path}: {values.shape[1]} columns but {header.size} radii")
    grid = _infer_grid(np.array(times), header)
    mask = np.ones(values.shape, dtype=bool) if sentinel is None else values > sentinel
    return Bubblegram(grid, values, mask, 0, {"source": str(path)})


def _infer_grid(times, radii) -> GridSpec:
    def spacing(x):
        if np.allclose(np.diff(x), np.diff(x).mean(), rtol=1e-6, atol=0):
            return "linear"
        if np.all(x > 0) and np.allclose(np.diff(np.log(x)), np.diff(np.log(x)).mean(), rtol=1e-6):
            return "logarithmic"
        raise BubblegramError("axis is neither linear nor logarithmic")

    return GridSpec(
        float(times[0]), float(times[-1]), float(radii[0]), float(radii[-1]),
        times.size, radii.size, spacing(times), spacing(radii),
    )


def write_bubblegram_binary(b: Bubblegram, stem) -> tuple[Path, Path]:
    stem = Path(stem)
    data_path = stem.with_suffix(".f64")
    side_path = stem.with_suffix(".json")
    sidecar = {
        "format": FORMAT_TAG,
        "data_file": data_path.name,
        "dtype": "<f8",
        "order": "C",
        "shape": list(b.values.shape),
        "rows": "time",
        "cols": "radius",
        "grid": b.grid.to_dict(),
        "window_len": int(b.window_len),
        "sentinel": None if b.mask.all() else b.sentinel,
        "metadata": b.metadata,
    }
    try:
        atomic_write_bytes(data_path, np.ascontiguousarray(b.values, "<f8").tobytes())
    except OSError as exc:
        raise BubblegramError(f"{data_path}: cannot write: {exc.strerror or exc}") from exc
    write_json(sidecar, side_path)
    return data_path, side_path


def read_bubblegram_binary(sidecar_path) -> Bubblegram:
    sidecar_path = Path(sidecar_path)
    try:
        side = json.loads(sidecar_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BubblegramError(f"{sidecar_path}: {exc}") from exc
    if side.get("format") != FORMAT_TAG:
        raise BubblegramError(f"{sidecar_path}: not a {FORMAT_TAG} sidecar")
    data_path = sidecar_path.parent / side["data_file"]
    raw = data_path.read_bytes()
    shape = tuple(side["shape"])
    if len(raw) != 8 * shape[0] * shape[1]:
        raise BubblegramError(
            f"{data_path}: {len(raw)} bytes, expected {8 * shape[0] * shape[1]} for shape {shape}"
        )
    values = np.frombuffer(raw, "<f8").reshape(shape).astype(float)
    sentinel = side.get("sentinel")
    mask = np.ones(shape, dtype=bool) if sentinel is None else values > sentinel
    return Bubblegram(
        GridSpec.from_dict(side["grid"]), values, mask, int(side["window_len"]), side.get("metadata", {})
    )


def read_bubblegram(path) -> Bubblegram:
    """Load either format, chosen by extension (.csv, or .json/.f64)."""
    path = Path(path)
    if path.suffix == ".csv":
        return read_bubblegram_csv(path)
    if path.suffix in (".json", ".f64"):
        return read_bubblegram_binary(path.with_suffix(".json"))
    raise ArgumentError(f"{path}: unknown bubblegram file type {path.suffix!r}")


def export_bubblegram(b: Bubblegram, stem, formats=("csv",), render=None, view="joint", truth=None):
    """Write ``b`` in each of ``formats`` (csv, binary, image, raster).

    Returns the list of written paths.
    """
    from . import plotting

    stem = Path(stem)
    written = []
    for fmt in formats:
        if fmt == "csv":
            p = stem.with_suffix(".csv")
            write_bubblegram_csv(b, p)
            written.append(p)
        elif fmt == "binary":
            written.extend(write_bubblegram_binary(b, stem))
        elif fmt == "image":
            p = stem.with_suffix(".png")
            plotting.plot_bubblegram(b, p, render or plotting.RenderSpec(), view=view, truth=truth)
            written.append(p)
        elif fmt == "raster":
            p = stem.parent / (stem.name + "_raster.png")
            v = b.values if view == "joint" else b.conditional()
            m = b.mask if view == "joint" else np.isfinite(v)
            plotting.save_raster(v, p, m, render or plotting.RenderSpec())
            written.append(p)
        else:
            raise ArgumentError(f"unknown export format {fmt!r}")
    return written


def write_radius_density_csv(rd: RadiusDensity, path):
    lines = ["radius_mm,density_per_mm,weight_mm"]
    for r, d, w in zip(rd.radii, rd.density, rd.weights):
        lines.append(f"{float(r) * 1e3!r},{float(d) * 1e-3!r},{float(w) * 1e3!r}")
    _write_text(path, "\n".join(lines) + "\n")


def read_radius_density_csv(path) -> RadiusDensity:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return RadiusDensity(arr[:, 0] * 1e-3, arr[:, 1] * 1e3, arr[:, 2] * 1e-3)


def write_spectrogram_csv(spec, path, precision: int = CSV_PRECISION):
    buf = io.StringIO()
    buf.write("# spectrogram power |DFT|^2; rows: frame, columns: frequency bin\n")
    buf.write("time_s\\freq_hz," + _fmt(spec.freqs, 17) + "\n")
    for t, row in zip(spec.times, spec.power):
        buf.write(f"{float(t)!r}," + _fmt(row, precision) + "\n")
    _write_text(path, buf.getvalue())
