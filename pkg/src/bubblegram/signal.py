"""Uniformly sampled real signal container."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError


@dataclass(frozen=True, eq=False)
class Signal:
    """A uniformly sampled, real-valued time series.

    Sample ``k`` sits at ``start_time + k / sample_rate`` seconds.
    """

    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.samples, dtype=float)
        if y.ndim != 1:
            raise ArgumentError(f"samples must be 1-D, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ArgumentError("samples must be finite")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ArgumentError(f"sample_rate must be > 0, got {self.sample_rate!r}")
        if not math.isfinite(self.start_time):
            raise ArgumentError("start_time must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "samples", y)

    def __len__(self):
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def end_time(self) -> float:
        """Time of the last sample."""
        return self.start_time + (self.samples.size - 1) / self.sample_rate

    def with_samples(self, samples, **metadata) -> "Signal":
        md = dict(self.metadata)
        md.update(metadata)
        return Signal(samples, self.sample_rate, self.start_time, md)

    def scaled(self, factor: float) -> "Signal":
        return self.with_samples(self.samples * factor)

    def require_nonempty(self):
        if self.samples.size == 0:
            raise ArgumentError("signal is empty")
