"""Marginal log-posterior of a single damped-sinusoid bubble pulse.

With flat priors on the two linear amplitudes and a Jeffreys prior on the
noise variance, the model ``y = A d + B e + noise`` integrates to a
Student-t form in the least-squares residual::

    log p(y | t0, R0) = -1/2 log|G| + (2 - N)/2 log(residual) + const

where ``G`` is the Gram matrix of the (cos, sin) basis ``(d, e)``. Two
variants are provided: the orthogonal approximation, which treats ``d`` and
``e`` as orthogonal (``|G| -> |d|^2 |e|^2``), and the exact projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateBasisError, HypothesisUnsupportedError
from .physics import DEFAULT_CONSTANTS, PhysicalConstants, check_times, pulse_carriers
from .signal import Signal

#: Relative floor on the residual before taking its log.
RESIDUAL_FLOOR = 1e-12
#: Largest Gram condition number accepted by the exact projection.
MAX_CONDITION = 1e12
#: Amplitudes and noise power use three degrees of freedom.
MIN_SAMPLES = 4


@dataclass(frozen=True, eq=False)
class BasisPair:
    """Cosine and sine carriers of one (t0, R0) hypothesis."""

    d: np.ndarray
    e: np.ndarray

    def gram(self) -> np.ndarray:
        dd = float(self.d @ self.d)
        ee = float(self.e @ self.e)
        de = float(self.d @ self.e)
        return np.array([[dd, de], [de, ee]])


@dataclass(frozen=True)
class LogPosteriorValue:
    """Log-posterior of one hypothesis, up to an additive constant.

    ``residual`` is the (floored) misfit that enters the log. ``clamped`` is
    set when the floor was applied and ``degenerate`` when the signal itself
    has zero energy.
    """

    value: float
    residual: float
    norm_d: float
    norm_e: float
    cross: float = 0.0
    n: int = 0
    clamped: bool = False
    degenerate: bool = False


def make_basis(
    t0: float,
    r0: float,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
    times=None,
    support: int | None = None,
) -> BasisPair:
    """Basis of the hypothesis (t0, r0) sampled at ``times``.

    ``support`` optionally keeps only the first ``support`` samples after the
    onset; later samples are set to zero.
    """
    if times is None:
        raise ArgumentError("times is required")
    t = check_times(times)
    d, e = pulse_carriers(t0, r0, consts, t)
    if support is not None:
        if support < 1:
            raise ArgumentError(f"support must be >= 1 sample, got {support}")
        first = int(np.searchsorted(t, t0, side="right"))
        d[first + support:] = 0.0
        e[first + support:] = 0.0
    return BasisPair(d, e)


def _prepare(y: Signal, t0, r0, consts, support):
    samples = np.asarray(y.samples, dtype=float)
    n = samples.size
    if n < MIN_SAMPLES:
        raise ArgumentError(f"need at least {MIN_SAMPLES} samples, got {n}")
    basis = make_basis(t0, r0, consts, y.times, support)
    if not (np.any(basis.d) or np.any(basis.e)):
        raise HypothesisUnsupportedError(
            f"t0={t0!r} s is not before the last sample at {y.end_time!r} s"
        )
    return samples, basis


def _finish(energy, residual, logdet, n, norms, cross) -> LogPosteriorValue:
    floor = max(RESIDUAL_FLOOR * energy, np.finfo(float).tiny)
    clamped = not residual > floor
    res = floor if clamped else residual
    value = -0.5 * logdet + 0.5 * (2 - n) * np.log(res)
    return LogPosteriorValue(
        value=float(value),
        residual=float(res),
        norm_d=float(norms[0]),
        norm_e=float(norms[1]),
        cross=float(cross),
        n=n,
        clamped=clamped,
        degenerate=energy == 0.0,
    )


def marginal_log_posterior(
    y: Signal,
    t0: float,
    r0: float,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
    support: int | None = None,
) -> LogPosteriorValue:
    """Orthogonal-approximation log-posterior of a pulse at (t0, r0) in ``y``.

    residual = |y|^2 - <y,d>^2/|d|^2 - <y,e>^2/|e|^2

    The residual can fall below zero when ``d`` and ``e`` are far from
    orthogonal; it is then floored and ``clamped`` is set.
    """
    samples, basis = _prepare(y, t0, r0, consts, support)
    d, e = basis.d, basis.e
    dd = float(d @ d)
    ee = float(e @ e)
    if dd == 0.0 or ee == 0.0:
        raise HypothesisUnsupportedError("one basis carrier is identically zero")
    yd = float(samples @ d)
    ye = float(samples @ e)
    energy = float(samples @ samples)
    residual = energy - yd * yd / dd - ye * ye / ee
    return _finish(
        energy,
        residual,
        np.log(dd) + np.log(ee),
        samples.size,
        (np.sqrt(dd), np.sqrt(ee)),
        float(d @ e),
    )


def _exact_solve(samples, basis):
    gram = basis.gram()
    if not np.all(np.isfinite(gram)) or gram[0, 0] == 0.0 or gram[1, 1] == 0.0:
        raise DegenerateBasisError("basis carrier has zero norm")
    cond = np.linalg.cond(gram)
    if not cond < MAX_CONDITION:
        raise DegenerateBasisError(f"Gram matrix condition number {cond:.3g}")
    proj = np.array([samples @ basis.d, samples @ basis.e])
    coef = np.linalg.solve(gram, proj)
    return gram, coef


def marginal_log_posterior_exact(
    y: Signal,
    t0: float,
    r0: float,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
    support: int | None = None,
) -> LogPosteriorValue:
    """Exact-projection log-posterior: least-squares fit onto span(d, e)."""
    samples, basis = _prepare(y, t0, r0, consts, support)
    gram, coef = _exact_solve(samples, basis)
    fit = coef[0] * basis.d + coef[1] * basis.e
    resid = samples - fit
    energy = float(samples @ samples)
    sign, logdet = np.linalg.slogdet(gram)
    if sign <= 0:
        raise DegenerateBasisError("Gram matrix is not positive definite")
    return _finish(
        energy,
        float(resid @ resid),
        logdet,
        samples.size,
        (np.sqrt(gram[0, 0]), np.sqrt(gram[1, 1])),
        gram[0, 1],
    )


def recover_amplitudes(
    y: Signal,
    t0: float,
    r0: float,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
    support: int | None = None,
) -> tuple[float, float]:
    """Least-squares (A, B) of the pulse at (t0, r0), with C = 1."""
    samples, basis = _prepare(y, t0, r0, consts, support)
    _, coef = _exact_solve(samples, basis)
    return float(coef[0]), float(coef[1])
