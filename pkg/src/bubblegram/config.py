"""Analysis configuration file (JSON).

Keys carry their units. Unknown keys are rejected at every level. The path
may also come from the ``BUBBLEGRAM_CONFIG`` environment variable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dsp import FilterSpec
from .engine import (
    DATA_SPANS,
    DEFAULT_MIN_PROMINENCE,
    DEFAULT_MIN_SEPARATION,
    ENGINES,
    ONSETS,
    GridSpec,
)
from .errors import ArgumentError
from .physics import PhysicalConstants
from .plotting import RenderSpec

ENV_VAR = "BUBBLEGRAM_CONFIG"
VERSION = 1


@dataclass(frozen=True)
class GridConfig:
    """Grid axes; ``None`` time bounds are taken from the signal."""

    t_min_s: float | None = None
    t_max_s: float | None = None
    r_min_mm: float = 0.2
    r_max_mm: float = 2.0
    n_time: int = 500
    n_radius: int = 500
    time_spacing: str = "linear"
    radius_spacing: str = "linear"

    def resolve(self, start: float, end: float) -> GridSpec:
        """GridSpec for a signal whose samples run from ``start`` to ``end`` s."""
        t_min = start if self.t_min_s is None else self.t_min_s
        t_max = end if self.t_max_s is None else self.t_max_s
        return GridSpec(
            t_min, t_max, self.r_min_mm * 1e-3, self.r_max_mm * 1e-3,
            self.n_time, self.n_radius, self.time_spacing, self.radius_spacing,
        )


@dataclass(frozen=True)
class DetectConfig:
    min_prominence: float = DEFAULT_MIN_PROMINENCE
    min_separation_s: float = DEFAULT_MIN_SEPARATION[0]
    min_separation_mm: float = DEFAULT_MIN_SEPARATION[1] * 1e3


@dataclass(frozen=True)
class AnalysisConfig:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    filter_enabled: bool = False
    filter: FilterSpec = field(default_factory=FilterSpec)
    grid: GridConfig = field(default_factory=GridConfig)
    window_s: float | None = None
    engine: str = "exact"
    data_span: str = "grid"
    onset: str = "cell"
    detect: DetectConfig = field(default_factory=DetectConfig)
    render: RenderSpec = field(default_factory=RenderSpec)
    output_dir: str = "."

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ArgumentError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.data_span not in DATA_SPANS:
            raise ArgumentError(f"data_span must be one of {DATA_SPANS}, got {self.data_span!r}")
        if self.onset not in ONSETS:
            raise ArgumentError(f"onset must be one of {ONSETS}, got {self.onset!r}")
        if self.window_s is not None and not self.window_s > 0:
            raise ArgumentError(f"window_s must be > 0, got {self.window_s!r}")
        if self.detect.min_prominence < 0:
            raise ArgumentError("detect.min_prominence must be >= 0")

    def separation(self) -> tuple[float, float]:
        return (self.detect.min_separation_s, self.detect.min_separation_mm * 1e-3)


def _section(name, data, allowed):
    if not isinstance(data, dict):
        raise ArgumentError(f"config section {name!r} must be an object")
    extra = set(data) - set(allowed)
    if extra:
        raise ArgumentError(f"unknown key(s) in config section {name!r}: {sorted(extra)}")
    return data


_CONST_KEYS = {"gamma": "gamma", "p0_pa": "p0", "rho0_kg_m3": "rho0", "depth_m": "depth", "decay_unit": "decay_unit"}
_FILTER_KEYS = {"low_cut_hz": "low_cut", "high_cut_hz": "high_cut", "order": "order", "mode": "mode"}
_RENDER_KEYS = {
    "colormap": "colormap", "clip_low_pct": "clip_low", "clip_high_pct": "clip_high",
    "width_px": "width", "height_px": "height",
}
_TOP_KEYS = {
    "version", "constants", "filter", "grid", "window_s", "engine", "data_span",
    "onset", "detect", "render", "output_dir",
}


def to_dict(cfg: AnalysisConfig) -> dict:
    c, f, r = cfg.constants, cfg.filter, cfg.render
    return {
        "version": VERSION,
        "constants": {k: getattr(c, v) for k, v in _CONST_KEYS.items()},
        "filter": {"enabled": cfg.filter_enabled, **{k: getattr(f, v) for k, v in _FILTER_KEYS.items()}},
        "grid": dict(cfg.grid.__dict__),
        "window_s": cfg.window_s,
        "engine": cfg.engine,
        "data_span": cfg.data_span,
        "onset": cfg.onset,
        "detect": dict(cfg.detect.__dict__),
        "render": {k: getattr(r, v) for k, v in _RENDER_KEYS.items()},
        "output_dir": cfg.output_dir,
    }


def from_dict(d: dict) -> AnalysisConfig:
    _section("<top>", d, _TOP_KEYS)
    if d.get("version", VERSION) != VERSION:
        raise ArgumentError(f"unsupported config version {d.get('version')!r}")
    try:
        kw = {}
        if "constants" in d:
            s = _section("constants", d["constants"], _CONST_KEYS)
            kw["constants"] = PhysicalConstants(**{_CONST_KEYS[k]: v for k, v in s.items()})
        if "filter" in d:
            s = dict(_section("filter", d["filter"], set(_FILTER_KEYS) | {"enabled"}))
            kw["filter_enabled"] = bool(s.pop("enabled", False))
            kw["filter"] = FilterSpec(**{_FILTER_KEYS[k]: v for k, v in s.items()})
        if "grid" in d:
            s = _section("grid", d["grid"], GridConfig.__dataclass_fields__)
            kw["grid"] = GridConfig(**s)
        if "detect" in d:
            s = _section("detect", d["detect"], DetectConfig.__dataclass_fields__)
            kw["detect"] = DetectConfig(**s)
        if "render" in d:
            s = _section("render", d["render"], _RENDER_KEYS)
            kw["render"] = RenderSpec(**{_RENDER_KEYS[k]: v for k, v in s.items()})
        for key in ("window_s", "engine", "data_span", "onset", "output_dir"):
            if key in d:
                kw[key] = d[key]
        return AnalysisConfig(**kw)
    except TypeError as exc:
        raise ArgumentError(f"invalid config value: {exc}") from exc


def dumps(cfg: AnalysisConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"


def loads(text: str) -> AnalysisConfig:
    try:
        return from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"config is not valid JSON: {exc}") from exc


def load(path=None) -> AnalysisConfig:
    """Load ``path``, else ``$BUBBLEGRAM_CONFIG``, else the defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return AnalysisConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ArgumentError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        return loads(text)
    except ArgumentError as exc:
        raise ArgumentError(f"{path}: {exc}") from exc


def with_overrides(cfg: AnalysisConfig, **kw) -> AnalysisConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
