"""Calibration runs for the peak-picking defaults.

Three populations of bubblegram peaks are collected on the 500 x 500
reference grid:

* null: pure noise, no pulse (max-minus-median and every peak prominence);
* single: one 1 mm bubble at 0.5 s, every peak that is not the true one;
* multi: ten-bubble scenarios, prominence of the peak matching each true
  pulse and of every peak matching none.

``python -m bubblegram.calibration`` prints a summary as JSON.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from .engine import GridSpec, compute_bubblegram, peak_prominence
from .simkit import SimScenario, paper_multi, paper_single, simulate

MATCH_STEPS = 2


def match_mask(peaks, grid: GridSpec, t0: float, r0: float, steps: int = MATCH_STEPS):
    """Peaks within ``steps`` grid steps of (t0, r0) on both axes."""
    t_ax, r_ax = grid.times, grid.radii
    dt = np.abs(t_ax[peaks[:, 0]] - t0) <= steps * grid.time_step * (1 + 1e-9)
    dr = np.abs(r_ax[peaks[:, 1]] - r0) <= steps * grid.radius_step * (1 + 1e-9)
    return dt & dr


def null_run(seed: int, grid: GridSpec | None = None, **kw) -> dict:
    grid = grid or GridSpec.paper()
    sig, _ = simulate(SimScenario(1.0, 48000.0, (), 0.1, seed))
    b = compute_bubblegram(sig, grid, **kw)
    _, prom = peak_prominence(b.values, b.mask)
    v = b.values[b.mask]
    return {
        "seed": seed,
        "max_minus_median": float(v.max() - np.median(v)),
        "max_prominence": float(prom.max()),
    }


def single_run(seed: int, grid: GridSpec | None = None, **kw) -> dict:
    grid = grid or GridSpec.paper()
    sc = paper_single(seed)
    sig, truth = simulate(sc)
    b = compute_bubblegram(sig, grid, **kw)
    peaks, prom = peak_prominence(b.values, b.mask)
    p = truth.pulses[0]
    hit = match_mask(peaks, grid, p.t0, p.r0)
    v = b.values[b.mask]
    return {
        "seed": seed,
        "max_minus_median": float(v.max() - np.median(v)),
        "true_prominence": float(prom[hit].max()) if hit.any() else None,
        "max_spurious": float(prom[~hit].max()) if (~hit).any() else 0.0,
    }


def multi_run(seed: int, grid: GridSpec | None = None, **kw) -> dict:
    grid = grid or GridSpec.paper()
    sig, truth = simulate(paper_multi(seed))
    b = compute_bubblegram(sig, grid, **kw)
    peaks, prom = peak_prominence(b.values, b.mask)
    any_hit = np.zeros(len(prom), dtype=bool)
    true_prom = []
    for p in truth.pulses:
        hit = match_mask(peaks, grid, p.t0, p.r0)
        any_hit |= hit
        true_prom.append(float(prom[hit].max()) if hit.any() else None)
    return {
        "seed": seed,
        "true_prominence": true_prom,
        "max_spurious": float(prom[~any_hit].max()) if (~any_hit).any() else 0.0,
    }


def summarize(n_null: int = 100, n_single: int = 20, n_multi: int = 20) -> dict:
    null = [null_run(s) for s in range(n_null)]
    single = [single_run(s) for s in range(n_single)]
    multi = [multi_run(s) for s in range(n_multi)]
    true_multi = [p for m in multi for p in m["true_prominence"] if p is not None]
    return {
        "null_max_minus_median_max": max(r["max_minus_median"] for r in null),
        "null_max_prominence": max(r["max_prominence"] for r in null),
        "single_max_minus_median_min": min(r["max_minus_median"] for r in single),
        "single_max_spurious": max(r["max_spurious"] for r in single),
        "single_true_prominence_min": min(r["true_prominence"] or 0.0 for r in single),
        "multi_max_spurious": max(r["max_spurious"] for r in multi),
        "multi_true_prominence_min": min(true_multi) if true_multi else None,
        "multi_unmatched": sum(p is None for m in multi for p in m["true_prominence"]),
        "multi_true_prominences": sorted(true_multi)[:20],
    }


if __name__ == "__main__":
    counts = [int(a) for a in sys.argv[1:4]] or [100, 20, 20]
    json.dump(summarize(*counts), sys.stdout, indent=2)
    print()
