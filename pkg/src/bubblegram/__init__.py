"""Bubble radius estimation from single-hydrophone recordings.

The central object is the bubblegram: a grid over (onset time, radius) of
the marginal log-posterior of a damped-sinusoid bubble pulse model, with
amplitudes and noise power integrated out analytically.
"""

from .physics import (
    PhysicalConstants,
    PulseParams,
    lambda_of_radius,
    omega_of_radius,
    synth_pulse,
)
from .signal import Signal
from .bayes import (
    BasisPair,
    LogPosteriorValue,
    make_basis,
    marginal_log_posterior,
    marginal_log_posterior_exact,
    recover_amplitudes,
)
from .engine import (
    Bubblegram,
    Detection,
    GridSpec,
    RadiusDensity,
    aggregate_radius_density,
    compute_bubblegram,
    find_local_maxima,
    map_estimate,
)
from .errors import (
    ArgumentError,
    BubblegramError,
    DegenerateBasisError,
    DomainError,
    HypothesisUnsupportedError,
    NoDetectionError,
    WavError,
)

__version__ = "0.1.0"

__all__ = [
    "PhysicalConstants",
    "PulseParams",
    "omega_of_radius",
    "lambda_of_radius",
    "synth_pulse",
    "Signal",
    "BasisPair",
    "LogPosteriorValue",
    "make_basis",
    "marginal_log_posterior",
    "marginal_log_posterior_exact",
    "recover_amplitudes",
    "GridSpec",
    "Bubblegram",
    "Detection",
    "RadiusDensity",
    "compute_bubblegram",
    "map_estimate",
    "find_local_maxima",
    "aggregate_radius_density",
    "ArgumentError",
    "BubblegramError",
    "DegenerateBasisError",
    "DomainError",
    "HypothesisUnsupportedError",
    "NoDetectionError",
    "WavError",
]
