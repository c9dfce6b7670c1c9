"""Seeded synthetic bubble recordings with ground truth.

Random streams are Philox (counter-based) generators keyed by the scenario
seed through ``numpy.random.SeedSequence(seed, spawn_key=(stream,))``:

============  ======================================
stream        use
============  ======================================
0             additive Gaussian noise
1             onset times and radii of sampled pulses
============  ======================================
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .physics import DEFAULT_CONSTANTS, PhysicalConstants, PulseParams, synth_pulse
from .signal import Signal

NOISE_STREAM = 0
SCENARIO_STREAM = 1


def philox(seed: int, stream: int) -> np.random.Generator:
    """Generator for one documented stream of a seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimScenario:
    duration: float
    sample_rate: float
    pulses: tuple = ()
    noise_sigma2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ArgumentError(f"duration must be > 0, got {self.duration!r}")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ArgumentError(f"sample_rate must be > 0, got {self.sample_rate!r}")
        if not (math.isfinite(self.noise_sigma2) and self.noise_sigma2 >= 0):
            raise ArgumentError(f"noise_sigma2 must be >= 0, got {self.noise_sigma2!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ArgumentError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        pulses = tuple(p if isinstance(p, PulseParams) else PulseParams(**p) for p in self.pulses)
        object.__setattr__(self, "pulses", pulses)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "sample_rate": self.sample_rate,
            "noise_sigma2": self.noise_sigma2,
            "seed": self.seed,
            "pulses": [p.to_dict() for p in self.pulses],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimScenario":
        known = {"duration", "sample_rate", "noise_sigma2", "seed", "pulses"}
        extra = set(d) - known
        if extra:
            raise ArgumentError(f"unknown scenario keys: {sorted(extra)}")
        missing = {"duration", "sample_rate"} - set(d)
        if missing:
            raise ArgumentError(f"missing scenario keys: {sorted(missing)}")
        return cls(
            duration=float(d["duration"]),
            sample_rate=float(d["sample_rate"]),
            pulses=tuple(PulseParams(**p) for p in d.get("pulses", [])),
            noise_sigma2=float(d.get("noise_sigma2", 0.0)),
            seed=d.get("seed", 0),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class GroundTruth:
    pulses: tuple
    scenario_hash: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "scenario_hash": self.scenario_hash,
            "pulses": [p.to_dict() for p in self.pulses],
        }
        out.update(self.extra)
        return out


def simulate(
    scenario: SimScenario, consts: PhysicalConstants = DEFAULT_CONSTANTS
) -> tuple[Signal, GroundTruth]:
    """Sum of the scenario's pulses plus white Gaussian noise."""
    n = scenario.n_samples
    if n < 1:
        raise ArgumentError("scenario holds no samples")
    times = np.arange(n) / scenario.sample_rate
    y = np.zeros(n)
    for p in scenario.pulses:
        y += synth_pulse(p, consts, times)
    if scenario.noise_sigma2 > 0:
        rng = philox(scenario.seed, NOISE_STREAM)
        y += math.sqrt(scenario.noise_sigma2) * rng.standard_normal(n)
    digest = scenario.digest()
    sig = Signal(y, scenario.sample_rate, 0.0, {"source": f"sim:{digest[:12]}"})
    return sig, GroundTruth(scenario.pulses, digest)


def sample_uniform_scenario(
    n_pulses: int,
    t_range: tuple[float, float],
    r_range: tuple[float, float],
    sigma2: float,
    seed: int,
    duration: float | None = None,
    sample_rate: float = 48000.0,
    amp_cos: float = 1.0,
    amp_sin: float = 0.0,
    scale_c: float = 1.0,
) -> SimScenario:
    """Scenario with ``n_pulses`` onsets and radii drawn i.i.d. uniform.

    ``duration`` defaults to ``t_range[1]``.
    """
    if int(n_pulses) != n_pulses or n_pulses < 0:
        raise ArgumentError(f"n_pulses must be a non-negative integer, got {n_pulses!r}")
    if not t_range[0] < t_range[1]:
        raise ArgumentError(f"inverted time range {t_range}")
    if not 0 < r_range[0] < r_range[1]:
        raise ArgumentError(f"invalid radius range {r_range}")
    rng = philox(seed, SCENARIO_STREAM)
    t0 = rng.uniform(t_range[0], t_range[1], int(n_pulses))
    r0 = rng.uniform(r_range[0], r_range[1], int(n_pulses))
    pulses = tuple(
        PulseParams(float(t), float(r), amp_cos, amp_sin, scale_c) for t, r in zip(t0, r0)
    )
    return SimScenario(
        duration=t_range[1] if duration is None else duration,
        sample_rate=sample_rate,
        pulses=pulses,
        noise_sigma2=sigma2,
        seed=seed,
    )


def paper_single(seed: int = 0) -> SimScenario:
    """One 1 mm bubble at 0.5 s in 1 s of noise with variance 0.1, 48 kHz."""
    return SimScenario(1.0, 48000.0, (PulseParams(0.5, 1e-3),), 0.1, seed)


def paper_multi(seed: int = 0) -> SimScenario:
    """Ten bubbles, onsets U[0, 1] s, radii U[0.5, 1.5] mm, variance 0.1."""
    return sample_uniform_scenario(10, (0.0, 1.0), (0.5e-3, 1.5e-3), 0.1, seed)


PRESETS = {"paper-single": paper_single, "paper-multi": paper_multi}
