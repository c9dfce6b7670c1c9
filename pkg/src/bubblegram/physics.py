"""Strasberg bubble model: resonance frequency, damping and pulse waveform.

All quantities are SI. ``omega_of_radius`` returns a *cyclic* frequency in
Hz; the oscillator and the decay exponent of the pulse use the angular value
``2*pi*f0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DomainError

#: Standard gravity, m/s^2.
G_STANDARD = 9.80665

#: Affine damping law: lambda = DAMPING_OFFSET + DAMPING_SLOPE * frequency.
DAMPING_OFFSET = 0.014
DAMPING_SLOPE = 1.1e-5

DECAY_UNITS = ("hz", "rad")


@dataclass(frozen=True)
class PhysicalConstants:
    """Acoustic constants of the gas/liquid system.

    Parameters
    ----------
    gamma : float
        Ratio of specific heats of the gas (dimensionless, > 1).
    p0 : float
        Static pressure at the surface, Pa.
    rho0 : float
        Liquid density, kg/m^3.
    depth : float
        Bubble depth in m. When non-zero, the hydrostatic term
        ``rho0 * g * depth`` is added to ``p0``.
    decay_unit : {"hz", "rad"}
        Unit of the frequency fed into the damping law. ``"hz"`` (default)
        gives lambda ~ 0.05 for a 1 mm air bubble.
    """

    gamma: float = 1.4
    p0: float = 101325.0
    rho0: float = 998.0
    depth: float = 0.0
    decay_unit: str = field(default="hz")

    def __post_init__(self):
        for name in ("gamma", "p0", "rho0", "depth"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ArgumentError(f"{name} must be finite, got {value!r}")
        if self.gamma <= 1.0:
            raise ArgumentError(f"gamma must be > 1, got {self.gamma!r}")
        if self.p0 <= 0.0:
            raise ArgumentError(f"p0 must be > 0, got {self.p0!r}")
        if self.rho0 <= 0.0:
            raise ArgumentError(f"rho0 must be > 0, got {self.rho0!r}")
        if self.depth < 0.0:
            raise ArgumentError(f"depth must be >= 0, got {self.depth!r}")
        if self.decay_unit not in DECAY_UNITS:
            raise ArgumentError(
                f"decay_unit must be one of {DECAY_UNITS}, got {self.decay_unit!r}"
            )

    @property
    def pressure(self) -> float:
        """Static pressure including the optional hydrostatic term, Pa."""
        return self.p0 + self.rho0 * G_STANDARD * self.depth

    def minnaert_coefficient(self) -> float:
        """``sqrt(3 gamma P / rho)``, in m/s. Equals ``2 pi f0 R0``."""
        return math.sqrt(3.0 * self.gamma * self.pressure / self.rho0)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "p0": self.p0,
            "rho0": self.rho0,
            "depth": self.depth,
            "decay_unit": self.decay_unit,
        }


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class PulseParams:
    """One bubble pulse.

    ``t0`` in s, ``r0`` in m. ``amp_cos``/``amp_sin`` are the linear
    amplitudes of the cosine and sine carriers and ``scale_c`` multiplies the
    whole pulse (wall amplitude and range are folded into it).
    """

    t0: float
    r0: float
    amp_cos: float = 1.0
    amp_sin: float = 0.0
    scale_c: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.t0):
            raise ArgumentError(f"t0 must be finite, got {self.t0!r}")
        if not (math.isfinite(self.r0) and self.r0 > 0.0):
            raise DomainError(f"r0 must be a positive radius, got {self.r0!r}")
        for name in ("amp_cos", "amp_sin", "scale_c"):
            if not math.isfinite(getattr(self, name)):
                raise ArgumentError(f"{name} must be finite")

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "r0": self.r0,
            "amp_cos": self.amp_cos,
            "amp_sin": self.amp_sin,
            "scale_c": self.scale_c,
        }


def _check_radius(r0):
    r = np.asarray(r0, dtype=float)
    if r.size == 0 or not np.all(np.isfinite(r)) or np.any(r <= 0.0):
        raise DomainError(f"radius must be finite and > 0, got {r0!r}")
    return r


def omega_of_radius(r0, consts: PhysicalConstants = DEFAULT_CONSTANTS):
    """Resonance frequency of a bubble of radius ``r0`` (m), in Hz.

    Accepts a scalar or an array; returns the same shape.

    >>> round(float(omega_of_radius(1e-3)), 1)
    3286.5
    """
    r = _check_radius(r0)
    f = consts.minnaert_coefficient() / (2.0 * math.pi * r)
    return float(f) if f.ndim == 0 else f


def lambda_of_radius(r0, consts: PhysicalConstants = DEFAULT_CONSTANTS):
    """Dimensionless damping constant for radius ``r0`` (m).

    The decay rate of the pulse envelope is ``2*pi*f0 * lambda`` in 1/s.
    """
    f = np.asarray(omega_of_radius(r0, consts))
    if consts.decay_unit == "rad":
        f = 2.0 * math.pi * f
    lam = DAMPING_OFFSET + DAMPING_SLOPE * f
    return float(lam) if lam.ndim == 0 else lam


def angular_frequency(r0, consts: PhysicalConstants = DEFAULT_CONSTANTS):
    """``2*pi*f0`` in rad/s."""
    return 2.0 * math.pi * np.asarray(omega_of_radius(r0, consts))


def decay_rate(r0, consts: PhysicalConstants = DEFAULT_CONSTANTS):
    """Envelope decay rate ``2*pi*f0*lambda`` in 1/s."""
    return angular_frequency(r0, consts) * np.asarray(lambda_of_radius(r0, consts))


def decay_time(r0, consts: PhysicalConstants = DEFAULT_CONSTANTS):
    """Envelope 1/e time in s."""
    return 1.0 / decay_rate(r0, consts)


def check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ArgumentError("times must be a non-empty 1-D array")
    if not np.all(np.isfinite(t)):
        raise ArgumentError("times must be finite")
    if t.size > 1 and not np.all(np.diff(t) > 0.0):
        raise ArgumentError("times must be strictly increasing")
    return t


def pulse_carriers(t0: float, r0: float, consts: PhysicalConstants, times: np.ndarray):
    """Unit-amplitude (cos, sin) carriers of a pulse, zero for ``t <= t0``.

    Both carry the physical scale ``(w0 R0)^2``.
    """
    w0 = float(angular_frequency(r0, consts))
    rate = w0 * float(lambda_of_radius(r0, consts))
    scale = (w0 * r0) ** 2
    d = np.zeros(times.shape)
    e = np.zeros(times.shape)
    on = times > t0
    tau = times[on] - t0
    env = scale * np.exp(-rate * tau)
    d[on] = env * np.cos(w0 * tau)
    e[on] = env * np.sin(w0 * tau)
    return d, e


def synth_pulse(params: PulseParams, consts: PhysicalConstants, times) -> np.ndarray:
    """Sample a bubble pulse at ``times`` (s).

    Returns ``C (w0 R0)^2 exp(-w0 lambda (t - t0)) (A cos + B sin)`` for
    ``t > t0`` and exactly zero elsewhere.
    """
    t = check_times(times)
    d, e = pulse_carriers(params.t0, params.r0, consts, t)
    out = params.scale_c * (params.amp_cos * d + params.amp_sin * e)
    out[t <= params.t0] = 0.0
    return out
