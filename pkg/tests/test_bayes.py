"""Log-posterior against independent least-squares oracles."""

import numpy as np
import pytest
import scipy.stats as ss

from bubblegram import (
    PhysicalConstants,
    PulseParams,
    Signal,
    make_basis,
    marginal_log_posterior,
    marginal_log_posterior_exact,
    recover_amplitudes,
    synth_pulse,
)
from bubblegram.errors import ArgumentError, DegenerateBasisError, HypothesisUnsupportedError

FS = 48000.0
C = PhysicalConstants()


def random_instance(rng, n=64, noise=1.0):
    """Signal of n samples holding a random pulse plus noise, and a random hypothesis."""
    t = np.arange(n) / FS
    true = PulseParams(
        float(rng.uniform(-2, 10) / FS), float(rng.uniform(0.2e-3, 2e-3)),
        float(rng.normal()), float(rng.normal()), 1e-3,
    )
    y = synth_pulse(true, C, t) + noise * rng.standard_normal(n)
    t0 = float(rng.uniform(-3, 15) / FS)
    r0 = float(rng.uniform(0.2e-3, 2e-3))
    return Signal(y, FS), t0, r0


def lstsq_residual(y, cols):
    x = np.column_stack(cols)
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    r = y - x @ beta
    return float(r @ r), beta


def test_exact_matches_lstsq_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        sig, t0, r0 = random_instance(rng)
        b = make_basis(t0, r0, C, sig.times)
        res, _ = lstsq_residual(sig.samples, [b.d, b.e])
        got = marginal_log_posterior_exact(sig, t0, r0, C)
        assert got.residual == pytest.approx(res, rel=1e-9)
        sign, logdet = np.linalg.slogdet(np.column_stack([b.d, b.e]).T @ np.column_stack([b.d, b.e]))
        assert sign > 0
        expect = -0.5 * logdet + 0.5 * (2 - sig.samples.size) * np.log(res)
        assert got.value == pytest.approx(expect, rel=1e-9)


def test_approximate_matches_orthogonal_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        sig, t0, r0 = random_instance(rng, noise=50.0)
        y = sig.samples
        b = make_basis(t0, r0, C, sig.times)
        # fit each carrier alone; the cross term is ignored
        res_d, _ = lstsq_residual(y, [b.d])
        _, beta_e = lstsq_residual(y, [b.e])
        res = res_d - float(b.e @ b.e) * beta_e[0] ** 2
        got = marginal_log_posterior(sig, t0, r0, C)
        assert not got.clamped
        assert got.residual == pytest.approx(res, rel=1e-9)
        expect = -0.5 * np.log(b.d @ b.d) - 0.5 * np.log(b.e @ b.e) + 0.5 * (2 - y.size) * np.log(res)
        assert got.value == pytest.approx(expect, rel=1e-9)


def test_exact_residual_is_minimal(rng):
    sig, t0, r0 = random_instance(rng)
    b = make_basis(t0, r0, C, sig.times)
    got = marginal_log_posterior_exact(sig, t0, r0, C)
    for _ in range(50):
        a, c = rng.normal(size=2) * 1e-3
        r = sig.samples - a * b.d - c * b.e
        assert got.residual <= float(r @ r) * (1 + 1e-12)


def test_gram_and_cross_reported(rng):
    sig, t0, r0 = random_instance(rng)
    b = make_basis(t0, r0, C, sig.times)
    g = b.gram()
    got = marginal_log_posterior_exact(sig, t0, r0, C)
    assert got.norm_d == pytest.approx(np.sqrt(g[0, 0]))
    assert got.norm_e == pytest.approx(np.sqrt(g[1, 1]))
    assert got.cross == pytest.approx(g[0, 1])
    assert got.n == 64


def test_scale_shifts_value_by_constant(rng):
    sig, _, _ = random_instance(rng, n=256)
    hyps = [(1e-4, 0.6e-3), (2e-4, 1.1e-3), (3e-5, 1.9e-3)]
    for fn in (marginal_log_posterior, marginal_log_posterior_exact):
        base = np.array([fn(sig, t, r, C).value for t, r in hyps])
        for k in (0.1, 10.0):
            scaled = np.array([fn(sig.scaled(k), t, r, C).value for t, r in hyps])
            shift = 0.5 * (2 - 256) * np.log(k * k)
            np.testing.assert_allclose(scaled - base, shift, rtol=1e-9)


def test_noiseless_recovery():
    t = np.arange(512) / FS
    p = PulseParams(2.5e-4, 0.9e-3, 0.4, -0.3)
    sig = Signal(synth_pulse(p, C, t), FS)
    a, b = recover_amplitudes(sig, p.t0, p.r0, C)
    assert a == pytest.approx(0.4, rel=1e-9)
    assert b == pytest.approx(-0.3, rel=1e-9)
    v = marginal_log_posterior_exact(sig, p.t0, p.r0, C)
    assert v.clamped
    assert v.residual == pytest.approx(1e-12 * float(sig.samples @ sig.samples))
    # the true hypothesis beats a perturbed one
    assert v.value > marginal_log_posterior_exact(sig, p.t0, 1.0e-3, C).value


def test_amplitude_interval_coverage():
    """Student-t intervals on A from the marginal posterior cover the truth."""
    rng = np.random.default_rng(99)
    n = 200
    t = np.arange(n) / FS
    p = PulseParams(1e-4, 1.2e-3, 0.8, 0.5, 1e-3)
    clean = synth_pulse(p, C, t)
    b = make_basis(p.t0, p.r0, C, t)
    ginv = np.linalg.inv(b.gram())
    q = ss.t.ppf(0.975, n - 2)
    reps, hits, s2_mean = 400, 0, 0.0
    for _ in range(reps):
        sig = Signal(clean + 0.2 * rng.standard_normal(n), FS)
        a, _ = recover_amplitudes(sig, p.t0, p.r0, C)
        res = marginal_log_posterior_exact(sig, p.t0, p.r0, C).residual
        s2 = res / (n - 2)
        s2_mean += s2 / reps
        half = q * np.sqrt(s2 * ginv[0, 0]) / 1e-3
        hits += abs(a / 1e-3 - 0.8) <= half
    assert 0.917 <= hits / reps <= 0.983
    assert s2_mean == pytest.approx(0.04, rel=0.05)


def test_support_truncates_basis():
    t = np.arange(100) / FS
    b = make_basis(t[10], 1e-3, C, t, support=20)
    nz = np.flatnonzero(b.d)
    assert nz.min() == 11 and nz.max() == 30


def test_unsupported_hypothesis():
    sig = Signal(np.ones(16), FS)
    with pytest.raises(HypothesisUnsupportedError):
        marginal_log_posterior_exact(sig, sig.end_time, 1e-3)
    with pytest.raises(HypothesisUnsupportedError):
        marginal_log_posterior(sig, 1.0, 1e-3)


def test_degenerate_basis():
    t = np.arange(16) / FS
    sig = Signal(np.ones(16), FS)
    # one supported sample: rank-one Gram
    with pytest.raises(DegenerateBasisError):
        marginal_log_posterior_exact(sig, t[-2], 1e-3)


def test_too_few_samples():
    with pytest.raises(ArgumentError):
        marginal_log_posterior_exact(Signal(np.ones(3), FS), -1.0, 1e-3)


def test_zero_signal_flagged():
    sig = Signal(np.zeros(64), FS)
    v = marginal_log_posterior_exact(sig, 0.0, 1e-3)
    assert v.degenerate and v.clamped and np.isfinite(v.value)


def test_approximate_residual_clamped_when_negative():
    """Near-parallel carriers make the orthogonal residual undershoot."""
    t = np.arange(64) / FS
    p = PulseParams(0.0, 2e-3, 1.0, 1.0)
    sig = Signal(synth_pulse(p, C, t), FS)
    b = make_basis(p.t0, p.r0, C, t)
    y = sig.samples
    raw = y @ y - (y @ b.d) ** 2 / (b.d @ b.d) - (y @ b.e) ** 2 / (b.e @ b.e)
    assert raw < 0
    v = marginal_log_posterior(sig, p.t0, p.r0, C)
    assert v.clamped and v.residual > 0
