"""Bubblegram evaluation: the marginal log-posterior over a (t0, R0) grid.

Cell ``(i, j)`` scores the hypothesis "a bubble of radius ``radii[j]``
starts at ``times[i]``". The pulse basis is supported on ``window_len``
samples after the onset.

Two data spans are available:

``"grid"`` (default)
    Every cell is scored against the same data, the samples covering
    ``[t_min, t_max + window]``. Values are then directly comparable across
    the whole grid and ``exp(values)`` is proportional to the joint
    posterior under flat priors.
``"window"``
    Each cell is scored against its own window ``[t_i, t_i + window]``
    only, as in a short-time transform. Values are comparable within a time
    row but not across rows.

Basis evaluations are shared across time cells: for radius ``j`` the
carrier ``g_j[k] = (w R)^2 exp((-a + i w) k dt)`` is computed once, its
correlation with the signal at every sample shift comes from one FFT, and a
fractional onset offset ``delta`` only multiplies it by the complex scalar
``exp((-a + i w) delta)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sp_fft
from threadpoolctl import threadpool_limits

from .bayes import MAX_CONDITION, MIN_SAMPLES, RESIDUAL_FLOOR
from .errors import ArgumentError, NoDetectionError
from .physics import (
    DEFAULT_CONSTANTS,
    PhysicalConstants,
    angular_frequency,
    decay_rate,
    decay_time,
)
from .signal import Signal

ENGINES = ("exact", "approximate")
DATA_SPANS = ("grid", "window")
SPACINGS = ("linear", "logarithmic")

ONSETS = ("cell", "node")

#: Radii per work unit. Fixed so that results do not depend on threads.
CHUNK_RADII = 16

#: Minimum window, s, and number of slowest decay times it must cover.
MIN_WINDOW = 0.02
WINDOW_DECAY_TIMES = 10.0

#: Peak-picking defaults, frozen from ``bubblegram.calibration`` runs on the
#: 500 x 500 reference grid (see README). Prominence is in log-posterior
#: units: spurious peaks reached 121, true peaks were at least 512. The
#: separation is about two grid steps on each axis.
DEFAULT_MIN_PROMINENCE = 250.0
DEFAULT_MIN_SEPARATION = (0.004, 7.5e-6)


@dataclass(frozen=True)
class GridSpec:
    """Axes of a bubblegram. Times in s, radii in m."""

    t_min: float
    t_max: float
    r_min: float
    r_max: float
    n_time: int
    n_radius: int
    time_spacing: str = "linear"
    radius_spacing: str = "linear"

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t_min, self.t_max, self.r_min, self.r_max)):
            raise ArgumentError("grid bounds must be finite")
        if not self.t_min < self.t_max:
            raise ArgumentError(f"t_min must be < t_max, got {self.t_min} >= {self.t_max}")
        if not 0.0 < self.r_min < self.r_max:
            raise ArgumentError(
                f"need 0 < r_min < r_max, got r_min={self.r_min}, r_max={self.r_max}"
            )
        if int(self.n_time) != self.n_time or self.n_time < 2:
            raise ArgumentError(f"n_time must be an integer >= 2, got {self.n_time}")
        if int(self.n_radius) != self.n_radius or self.n_radius < 2:
            raise ArgumentError(f"n_radius must be an integer >= 2, got {self.n_radius}")
        for name in ("time_spacing", "radius_spacing"):
            if getattr(self, name) not in SPACINGS:
                raise ArgumentError(f"{name} must be one of {SPACINGS}")
        if self.time_spacing == "logarithmic" and self.t_min <= 0.0:
            raise ArgumentError("logarithmic time axis needs t_min > 0")

    @classmethod
    def paper(cls, n_time: int = 500, n_radius: int = 500) -> "GridSpec":
        """500 x 500 grid over t in [0, 1] s and R in [0.2, 2] mm."""
        return cls(0.0, 1.0, 0.2e-3, 2.0e-3, n_time, n_radius)

    @staticmethod
    def _axis(lo, hi, n, spacing):
        if spacing == "logarithmic":
            return np.geomspace(lo, hi, int(n))
        return np.linspace(lo, hi, int(n))

    @property
    def times(self) -> np.ndarray:
        return self._axis(self.t_min, self.t_max, self.n_time, self.time_spacing)

    @property
    def radii(self) -> np.ndarray:
        return self._axis(self.r_min, self.r_max, self.n_radius, self.radius_spacing)

    @property
    def time_step(self) -> float:
        return float(np.min(np.diff(self.times)))

    @property
    def radius_step(self) -> float:
        return float(np.min(np.diff(self.radii)))

    def to_dict(self) -> dict:
        return {
            "t_min": self.t_min,
            "t_max": self.t_max,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "n_time": int(self.n_time),
            "n_radius": int(self.n_radius),
            "time_spacing": self.time_spacing,
            "radius_spacing": self.radius_spacing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Bubblegram:
    """Log-posterior matrix of shape ``(n_time, n_radius)``.

    Unsupported cells hold ``sentinel`` (one below the smallest supported
    value) and are ``False`` in ``mask``.
    """

    grid: GridSpec
    values: np.ndarray
    mask: np.ndarray
    window_len: int
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def radii(self) -> np.ndarray:
        return self.grid.radii

    @property
    def sentinel(self) -> float:
        if self.mask.all():
            return float("nan")
        return float(self.values[~self.mask][0])

    def median(self) -> float:
        if not self.mask.any():
            raise NoDetectionError("bubblegram has no supported cell")
        return float(np.median(self.values[self.mask]))

    def conditional(self) -> np.ndarray:
        """Log-posterior of R0 given t0: each time row log-normalised.

        Normalisation uses the radius grid measure, so ``exp`` of a row
        integrates to one over radius. Unsupported cells are ``-inf``.
        """
        v = np.where(self.mask, self.values, -np.inf)
        logw = np.log(radius_weights(self.radii))
        out = np.full(v.shape, -np.inf)
        rows = self.mask.any(axis=1)
        vr = v[rows]
        top = vr.max(axis=1, keepdims=True)
        lse = top[:, 0] + np.log(np.sum(np.exp(vr - top) * np.exp(logw), axis=1))
        out[rows] = vr - lse[:, None]
        return out


@dataclass(frozen=True)
class Detection:
    """A bubblegram peak. ``i``/``j`` index time and radius."""

    t0: float
    r0: float
    score: float
    prominence: float
    i: int
    j: int

    def to_dict(self) -> dict:
        return {
            "t0_s": self.t0,
            "r0_mm": round(self.r0 * 1e3, 4),
            "score": self.score,
            "prominence": self.prominence,
            "time_index": self.i,
            "radius_index": self.j,
        }


@dataclass(frozen=True, eq=False)
class RadiusDensity:
    """Posterior density over radius, per m, normalised under ``weights``."""

    radii: np.ndarray
    density: np.ndarray
    weights: np.ndarray

    def total(self) -> float:
        return float(np.sum(self.density * self.weights))

    def modes(self, min_rel_prominence: float = 0.05) -> np.ndarray:
        """Indices of local maxima of the density.

        A mode must rise above its surroundings by ``min_rel_prominence``
        times the density peak. The end points of the axis are never
        modes: a density rising into the grid edge is a boundary effect.
        """
        from scipy.signal import find_peaks

        peaks, _ = find_peaks(self.density, prominence=min_rel_prominence * self.density.max())
        return peaks


def radius_weights(radii: np.ndarray) -> np.ndarray:
    """Cell widths of a radius axis (edges at midpoints, half-step overhang)."""
    r = np.asarray(radii, dtype=float)
    mid = 0.5 * (r[1:] + r[:-1])
    edges = np.concatenate([[r[0] - (mid[0] - r[0])], mid, [r[-1] + (r[-1] - mid[-1])]])
    return np.diff(edges)


def default_window(grid: GridSpec, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Window long enough for the slowest-decaying hypothesis on the grid."""
    slowest = float(np.max(decay_time(grid.radii, consts)))
    return max(MIN_WINDOW, WINDOW_DECAY_TIMES * slowest)


def _carriers(radii, consts, n_win, fs):
    """Per-radius complex carrier over ``n_win`` samples and its Gram sums."""
    w = angular_frequency(radii, consts)
    a = decay_rate(radii, consts)
    scale = (w * radii) ** 2
    tau = np.arange(n_win)[:, None] / fs
    g = scale[None, :] * np.exp(-a[None, :] * tau) * np.exp(1j * w[None, :] * tau)
    # cumulative sums give the Gram terms of windows truncated by the signal end
    s_abs = np.cumsum(np.abs(g) ** 2, axis=0)
    s_sq = np.cumsum(g * g, axis=0)
    return w, a, g, s_abs, s_sq


def _signal_extent_check(signal: Signal, grid: GridSpec):
    # the recording spans [start, start + duration)
    t0, t1 = signal.start_time, signal.start_time + signal.duration
    tol = 1e-9 / signal.sample_rate
    problems = []
    if grid.t_min < t0 - tol:
        problems.append(f"t_min={grid.t_min} s precedes signal start {t0} s by {t0 - grid.t_min:.6g} s")
    if grid.t_max > t1 + tol:
        problems.append(f"t_max={grid.t_max} s exceeds signal end {t1} s by {grid.t_max - t1:.6g} s")
    if problems:
        raise ArgumentError("grid exceeds signal extent: " + "; ".join(problems))


def _gram_weights(z, s_abs, s_sq, engine):
    """Quadratic-form weights of the projection for rotated carriers.

    With ``h = z g`` and ``d + i e = h``: ``|d|^2 + |e|^2 = |z|^2 sum|g|^2``
    and ``|d|^2 - |e|^2 + 2i<d,e> = z^2 sum g^2``. Returns
    ``(w_dd, w_de, w_ee, logdet, ok)`` such that the projected energy is
    ``w_dd <y,d>^2 + w_de <y,d><y,e> + w_ee <y,e>^2``.
    """
    tot = (z.real ** 2 + z.imag ** 2) * s_abs
    diff = (z * z) * s_sq
    dd = 0.5 * (tot + diff.real)
    ee = 0.5 * (tot - diff.real)
    de = 0.5 * diff.imag
    ok = (dd > 0.0) & (ee > 0.0)
    if engine == "exact":
        det = dd * ee - de * de
        ok &= det > (dd + ee) ** 2 / MAX_CONDITION
        det = np.where(ok, det, 1.0)
        return ee / det, -2.0 * de / det, dd / det, np.log(det), ok
    dd = np.where(ok, dd, 1.0)
    ee = np.where(ok, ee, 1.0)
    return 1.0 / dd, np.zeros_like(dd), 1.0 / ee, np.log(dd) + np.log(ee), ok


def _onsets(times, t_axis, onset, n, n_win, data_span, dt):
    """Sub-onsets scored for each time cell.

    Returns ``(cell, start, delta)``: for every scored onset, its cell index,
    the index of its first supported sample, and the cell's fractional
    offset ``times[start] - onset`` (shared by all onsets of a cell, which
    sit a whole number of samples apart).
    """
    first = np.searchsorted(times, t_axis, side="right")
    delta = np.where(first < n, times[np.minimum(first, n - 1)] - t_axis, 0.0)
    if onset == "node":
        lo = hi = np.zeros(t_axis.size, dtype=int)
    else:
        step = np.diff(t_axis)
        half_lo = 0.5 * np.concatenate([[step[0]], step])
        half_hi = 0.5 * np.concatenate([step, [step[-1]]])
        lo = np.ceil(-half_lo / dt - 1e-6).astype(int)
        hi = np.ceil(half_hi / dt - 1e-6).astype(int) - 1
        hi = np.maximum(hi, lo)
    cells, starts = [], []
    limit = n - n_win if data_span == "window" else n - 1
    for i in range(t_axis.size):
        s = np.arange(first[i] + lo[i], first[i] + hi[i] + 1)
        s = s[(s >= 0) & (s <= limit)]
        cells.append(np.full(s.size, i))
        starts.append(s)
    return np.concatenate(cells), np.concatenate(starts), delta


def compute_bubblegram(
    signal: Signal,
    grid: GridSpec,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
    window: float | None = None,
    engine: str = "exact",
    data_span: str = "grid",
    onset: str = "cell",
    threads: int | None = None,
) -> Bubblegram:
    """Evaluate the log-posterior on every cell of ``grid``.

    Parameters
    ----------
    signal : Signal
        Data; must cover ``[grid.t_min, grid.t_max]``.
    grid : GridSpec
    consts : PhysicalConstants
    window : float, optional
        Basis support after the onset, in s. Defaults to
        :func:`default_window`.
    engine : {"exact", "approximate"}
        Exact 2x2 projection, or the orthogonal approximation.
    data_span : {"grid", "window"}
        Data each cell is scored against (see module docstring).
    onset : {"cell", "node"}
        ``"node"`` scores a pulse starting exactly at ``times[i]``.
        ``"cell"`` averages the likelihood over onsets spaced one sample
        apart across the cell ``times[i] +/- step/2`` (flat prior on t0
        within the cell), which removes the radius bias of onsets falling
        between nodes.
    threads : int, optional
        Worker threads; results are identical for any value.

    Notes
    -----
    A window running past the last sample is truncated in ``"grid"`` mode;
    in ``"window"`` mode such onsets are skipped. A cell with no scorable
    onset is unsupported.
    """
    if engine not in ENGINES:
        raise ArgumentError(f"engine must be one of {ENGINES}, got {engine!r}")
    if data_span not in DATA_SPANS:
        raise ArgumentError(f"data_span must be one of {DATA_SPANS}, got {data_span!r}")
    if onset not in ONSETS:
        raise ArgumentError(f"onset must be one of {ONSETS}, got {onset!r}")
    signal.require_nonempty()
    _signal_extent_check(signal, grid)
    if window is None:
        window = default_window(grid, consts)
    fs = signal.sample_rate
    n_win = int(round(window * fs))
    if n_win < MIN_SAMPLES:
        raise ArgumentError(
            f"window of {window} s holds {n_win} samples; need at least {MIN_SAMPLES}"
        )

    y = np.asarray(signal.samples, dtype=float)
    n = y.size
    times = signal.times
    t_axis = grid.times
    r_axis = grid.radii
    n_t, n_r = t_axis.size, r_axis.size

    cell, start, delta = _onsets(times, t_axis, onset, n, n_win, data_span, 1.0 / fs)
    lengths = np.minimum(n_win, n - start)
    counts = np.bincount(cell, minlength=n_t)
    has = counts > 0
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])[has]

    if data_span == "grid":
        if start.size:
            lo = max(0, int(start.min()) - 1)
            hi = int(min(n, start.max() + n_win))
        else:
            lo = hi = 0
        span = y[lo:hi]
        energy = float(span @ span)
        n_eff = span.size
    else:
        y2 = y * y
        energy = np.convolve(y2, np.ones(n_win), mode="valid")[start][:, None]
        n_eff = n_win
    trunc = np.flatnonzero(lengths < n_win)
    floor = np.maximum(RESIDUAL_FLOOR * energy, np.finfo(float).tiny)
    log_count = np.log(counts[has])[:, None]

    nfft = sp_fft.next_fast_len(n + n_win - 1)
    y_hat = sp_fft.fft(y, nfft)

    values = np.full((n_t, n_r), -np.inf)

    def work(cols):
        w, a, g, s_abs, s_sq = _carriers(r_axis[cols], consts, n_win, fs)
        # corr[s, j] = sum_k y[s + k] * g[k, j]
        conv = sp_fft.ifft(y_hat[:, None] * sp_fft.fft(g[::-1], nfft, axis=0), axis=0)
        corr = conv[n_win - 1:n_win - 1 + n][start]
        z_cell = np.exp((-a[None, :] + 1j * w[None, :]) * delta[:, None])
        h = z_cell[cell] * corr
        pd, pe = h.real, h.imag
        # Gram terms depend on the onset only through its cell, except for
        # windows truncated by the end of the signal
        full = _gram_weights(z_cell, s_abs[-1], s_sq[-1], engine)
        quad = [part[cell] for part in full]
        if trunc.size:
            z_t = z_cell[cell[trunc]]
            last = lengths[trunc] - 1
            for part, fix in zip(quad, _gram_weights(z_t, s_abs[last], s_sq[last], engine)):
                part[trunc] = fix
        c_dd, c_de, c_ee, logdet, ok = quad
        proj = c_dd * pd * pd + c_de * pd * pe + c_ee * pe * pe
        residual = np.maximum(energy - proj, floor)
        v = -0.5 * logdet + 0.5 * (2 - n_eff) * np.log(residual)
        v = np.where(ok & np.isfinite(v), v, -np.inf)
        # log-mean-exp over the onsets of each cell
        top = np.maximum.reduceat(v, offsets, axis=0)
        safe = np.where(np.isfinite(top), top, 0.0)
        mass = np.add.reduceat(np.exp(v - np.repeat(safe, counts[has], axis=0)), offsets, axis=0)
        with np.errstate(divide="ignore"):
            values[np.ix_(has, cols)] = safe + np.log(mass) - log_count

    chunks = [np.arange(s, min(s + CHUNK_RADII, n_r)) for s in range(0, n_r, CHUNK_RADII)]
    threads = threads or os.cpu_count() or 1
    if start.size:
        with threadpool_limits(limits=1):
            if threads == 1:
                for c in chunks:
                    work(c)
            else:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    list(pool.map(work, chunks))

    mask = np.isfinite(values)
    if mask.any():
        values[~mask] = values[mask].min() - 1.0
    else:
        values[:] = -1.0
    return Bubblegram(
        grid=grid,
        values=values,
        mask=mask,
        window_len=n_win,
        metadata={
            "engine": engine,
            "data_span": data_span,
            "onset": onset,
            "window_s": n_win / fs,
            "sample_rate": fs,
            "constants": consts.to_dict(),
            "source": signal.metadata.get("source", ""),
        },
    )


def _detection(b: Bubblegram, i: int, j: int, prominence: float) -> Detection:
    return Detection(
        t0=float(b.times[i]),
        r0=float(b.radii[j]),
        score=float(b.values[i, j]),
        prominence=float(prominence),
        i=int(i),
        j=int(j),
    )


def map_estimate(b: Bubblegram) -> Detection:
    """Cell of maximum log-posterior. Ties go to the earliest time, then
    the smallest radius."""
    if not b.mask.any():
        raise NoDetectionError("bubblegram has no supported cell")
    v = np.where(b.mask, b.values, -np.inf)
    flat = int(np.argmax(v))
    i, j = np.unravel_index(flat, v.shape)
    return _detection(b, i, j, float(v[i, j] - b.values[b.mask].min()))


def peak_prominence(values: np.ndarray, mask: np.ndarray | None = None):
    """Topographic prominence of every 8-neighbourhood peak.

    Cells are flooded from the top down with a union-find. When two basins
    meet at a cell, the peak of the lower basin gets prominence equal to its
    height above that saddle. The highest peak of each connected region is
    measured against the region's lowest cell.

    Returns
    -------
    peaks : ndarray of int, shape (m, 2)
    prominence : ndarray of float, shape (m,)
    """
    v = np.asarray(values, dtype=float)
    nr, nc = v.shape
    if mask is None:
        mask = np.ones(v.shape, dtype=bool)
    flat = v.ravel().tolist()
    size = nr * nc
    idx = np.flatnonzero(mask.ravel())
    # descending value, ascending index on ties
    order = idx[np.lexsort((idx, -v.ravel()[idx]))].tolist()

    parent = list(range(size))
    seen = [False] * size
    peak = [-1] * size
    low = [0.0] * size
    prom = {}

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    offsets = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
    for c in order:
        r, q = divmod(c, nc)
        roots = []
        for dr, dq in offsets:
            rr, qq = r + dr, q + dq
            if 0 <= rr < nr and 0 <= qq < nc:
                nb = rr * nc + qq
                if seen[nb]:
                    root = find(nb)
                    if root not in roots:
                        roots.append(root)
        seen[c] = True
        vc = flat[c]
        if not roots:
            peak[c] = c
            low[c] = vc
            continue
        # winner: basin whose peak is higher (earlier in order on ties)
        best = roots[0]
        for root in roots[1:]:
            pb, pr = peak[best], peak[root]
            if flat[pr] > flat[pb] or (flat[pr] == flat[pb] and pr < pb):
                best = root
        for root in roots:
            if root != best:
                prom[peak[root]] = flat[peak[root]] - vc
                parent[root] = best
        parent[c] = best
        low[best] = vc
    for c in order:
        if parent[c] == c:
            prom[peak[c]] = flat[peak[c]] - low[c]
    keys = sorted(prom)
    peaks = np.array([divmod(p, nc) for p in keys], dtype=int).reshape(-1, 2)
    return peaks, np.array([prom[p] for p in keys], dtype=float)


def find_local_maxima(
    b: Bubblegram,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
    min_separation: tuple[float, float] = DEFAULT_MIN_SEPARATION,
) -> list[Detection]:
    """Peaks of the bubblegram, strongest first.

    A peak is kept when its prominence is at least ``min_prominence`` and
    its score is not below the grid median. ``min_separation`` is
    ``(dt s, dr m)``: a peak closer than both to a stronger kept peak is
    dropped.
    """
    if min_prominence < 0:
        raise ArgumentError(f"min_prominence must be >= 0, got {min_prominence}")
    if not b.mask.any():
        return []
    peaks, prom = peak_prominence(b.values, b.mask)
    med = b.median()
    cands = []
    for (i, j), p in zip(peaks, prom):
        s = b.values[i, j]
        if p >= min_prominence and p > 0.0 and s >= med:
            cands.append((-s, i, j, p))
    cands.sort()
    dt, dr = min_separation
    t_ax, r_ax = b.times, b.radii
    kept: list[Detection] = []
    for _, i, j, p in cands:
        close = any(
            abs(t_ax[i] - k.t0) < dt and abs(r_ax[j] - k.r0) < dr for k in kept
        )
        if not close:
            kept.append(_detection(b, i, j, p))
    return kept


def aggregate_radius_density(b: Bubblegram, source: str = "conditional") -> RadiusDensity:
    """Radius density aggregated over the time axis.

    ``source="conditional"`` sums ``p(R0 | t0)`` over time rows, giving each
    onset time equal weight. ``source="joint"`` sums ``exp(values - max)``
    directly, i.e. the joint posterior marginalised over onset time.
    Unsupported cells are excluded in both cases.
    """
    if not b.mask.any():
        raise NoDetectionError("bubblegram has no supported cell")
    weights = radius_weights(b.radii)
    if source == "conditional":
        logv = b.conditional()
    elif source == "joint":
        logv = np.where(b.mask, b.values, -np.inf)
    else:
        raise ArgumentError(f"source must be 'conditional' or 'joint', got {source!r}")
    top = np.max(logv)
    mass = np.sum(np.exp(logv - top), axis=0)
    density = mass / np.sum(mass * weights)
    return RadiusDensity(radii=b.radii.copy(), density=density, weights=weights)
