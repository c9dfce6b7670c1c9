"""Figure rendering for bubblegrams, spectrograms and radius densities.

Everything renders off-screen with the Agg backend and writes PNG files.
"""

from __future__ import annotations

import io
from contextlib import contextmanager
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ArgumentError  # noqa: E402
from .wavio import atomic_write_bytes  # noqa: E402

DPI = 100

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.2,
    "image.interpolation": "nearest",
}


@dataclass(frozen=True)
class RenderSpec:
    colormap: str = "viridis"
    clip_low: float = 1.0
    clip_high: float = 99.0
    width: int = 800
    height: int = 600
    xlabel: str = "time (s)"
    ylabel: str = "radius (mm)"

    def __post_init__(self):
        if not 0.0 <= self.clip_low < self.clip_high <= 100.0:
            raise ArgumentError(
                f"need 0 <= clip_low < clip_high <= 100, got {self.clip_low}, {self.clip_high}"
            )
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ArgumentError("pixel dimensions must be integers")
        if self.width < 16 or self.height < 16:
            raise ArgumentError(f"image too small: {self.width}x{self.height}")
        if self.colormap not in plt.colormaps():
            raise ArgumentError(f"unknown colormap {self.colormap!r}")

    def to_dict(self) -> dict:
        return {
            "colormap": self.colormap,
            "clip_low": self.clip_low,
            "clip_high": self.clip_high,
            "width": int(self.width),
            "height": int(self.height),
            "xlabel": self.xlabel,
            "ylabel": self.ylabel,
        }


@contextmanager
def style():
    with plt.rc_context(STYLE):
        yield


def clip_limits(values, mask=None, render: RenderSpec = RenderSpec()):
    v = np.asarray(values, dtype=float)
    sel = v[mask] if mask is not None else v.ravel()
    sel = sel[np.isfinite(sel)]
    if sel.size == 0:
        return 0.0, 1.0
    lo, hi = np.percentile(sel, [render.clip_low, render.clip_high])
    return float(lo), float(hi)


def normalize(values, mask=None, render: RenderSpec = RenderSpec()) -> np.ndarray:
    """Map values to [0, 1] after percentile clipping; masked cells go to 0."""
    v = np.asarray(values, dtype=float)
    lo, hi = clip_limits(v, mask, render)
    if hi > lo:
        out = (np.clip(v, lo, hi) - lo) / (hi - lo)
    else:
        out = np.full(v.shape, 0.5)
    if mask is not None:
        out = np.where(mask, out, 0.0)
    return np.where(np.isfinite(out), out, 0.0)


def colorize(values, mask=None, render: RenderSpec = RenderSpec()) -> np.ndarray:
    """RGBA uint8 image of a matrix, rows as given."""
    cmap = plt.get_cmap(render.colormap)
    return cmap(normalize(values, mask, render), bytes=True)


def _resample(img: np.ndarray, height: int, width: int) -> np.ndarray:
    rows = (np.arange(height) * img.shape[0] // height).clip(0, img.shape[0] - 1)
    cols = (np.arange(width) * img.shape[1] // width).clip(0, img.shape[1] - 1)
    return img[rows][:, cols]


def _save(fig, path):
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=DPI)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def save_raster(values, path, mask=None, render: RenderSpec = RenderSpec()):
    """Axis-free PNG of a (time x radius) matrix, exactly ``width x height``.

    Time runs left to right and radius bottom to top.
    """
    rgba = colorize(np.asarray(values).T[::-1], None if mask is None else mask.T[::-1], render)
    img = _resample(rgba, int(render.height), int(render.width))
    buf = io.BytesIO()
    plt.imsave(buf, img, format="png")
    atomic_write_bytes(path, buf.getvalue())


def _figure(render: RenderSpec):
    return plt.figure(figsize=(render.width / DPI, render.height / DPI), dpi=DPI)


def plot_bubblegram(
    bubblegram,
    path,
    render: RenderSpec = RenderSpec(),
    view: str = "joint",
    truth=None,
    title: str = "",
):
    """Annotated bubblegram figure.

    ``view`` is ``"joint"`` (log-posterior as computed) or
    ``"conditional"`` (log-density of radius given onset time). ``truth``
    is an optional iterable of (t0 s, r0 m) marked with white circles.
    """
    if view == "joint":
        v, mask = bubblegram.values, bubblegram.mask
    elif view == "conditional":
        v = bubblegram.conditional()
        mask = np.isfinite(v)
    else:
        raise ArgumentError(f"view must be 'joint' or 'conditional', got {view!r}")
    t, r = bubblegram.times, bubblegram.radii * 1e3
    lo, hi = clip_limits(v, mask, render)
    shown = np.where(mask, np.clip(v, lo, hi), lo)
    with style():
        fig = _figure(render)
        ax = fig.add_subplot(111)
        mesh = ax.pcolormesh(t, r, shown.T, cmap=render.colormap, vmin=lo, vmax=hi, shading="nearest")
        fig.colorbar(mesh, ax=ax, label="log-posterior" if view == "joint" else "log p(R | t)")
        if truth:
            tt = [p[0] for p in truth]
            rr = [p[1] * 1e3 for p in truth]
            ax.scatter(tt, rr, s=60, facecolors="none", edgecolors="white", linewidths=1.0)
        ax.set_xlabel(render.xlabel)
        ax.set_ylabel(render.ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_spectrogram(spec, path, render: RenderSpec = RenderSpec(), fmax: float | None = None):
    """Spectrogram in dB re the maximum bin."""
    p = spec.power
    db = 10.0 * np.log10(np.maximum(p, p.max() * 1e-12) / p.max()) if p.max() > 0 else np.zeros_like(p)
    keep = spec.freqs <= (fmax if fmax else spec.freqs[-1])
    lo, hi = clip_limits(db[:, keep], None, render)
    with style():
        fig = _figure(render)
        ax = fig.add_subplot(111)
        mesh = ax.pcolormesh(
            spec.times, spec.freqs[keep], db[:, keep].T,
            cmap=render.colormap, vmin=lo, vmax=hi, shading="nearest",
        )
        fig.colorbar(mesh, ax=ax, label="power (dB)")
        ax.set_xlabel(render.xlabel)
        ax.set_ylabel("frequency (Hz)")
        fig.tight_layout()
        _save(fig, path)


def plot_radius_density(densities, path, labels=None, render: RenderSpec = RenderSpec(), log: bool = True):
    """One or more radius densities against radius in mm."""
    if not isinstance(densities, (list, tuple)):
        densities = [densities]
    labels = labels or [None] * len(densities)
    with style():
        fig = _figure(render)
        ax = fig.add_subplot(111)
        for rd, label in zip(densities, labels):
            y = rd.density * 1e-3  # per mm
            if log:
                y = np.log(np.maximum(y, np.finfo(float).tiny))
            ax.plot(rd.radii * 1e3, y, label=label)
        ax.set_xlabel(render.ylabel)
        ax.set_ylabel("log density (1/mm)" if log else "density (1/mm)")
        if any(labels):
            ax.legend()
        fig.tight_layout()
        _save(fig, path)
