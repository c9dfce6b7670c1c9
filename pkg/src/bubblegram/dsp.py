"""Signal conditioning and the spectrogram baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal as sps

from .errors import ArgumentError
from .signal import Signal

FILTER_MODES = ("zero-phase", "causal")


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth bandpass design. Cutoffs in Hz.

    ``order`` is the order of the lowpass prototype, so the bandpass has
    ``2 * order`` poles. It is realised as cascaded second-order sections.
    """

    low_cut: float = 200.0
    high_cut: float = 3000.0
    order: int = 4
    mode: str = "zero-phase"

    def __post_init__(self):
        if not (math.isfinite(self.low_cut) and math.isfinite(self.high_cut)):
            raise ArgumentError("filter cutoffs must be finite")
        if not 0.0 < self.low_cut < self.high_cut:
            raise ArgumentError(
                f"need 0 < low_cut < high_cut, got {self.low_cut} and {self.high_cut}"
            )
        if int(self.order) != self.order or self.order < 1:
            raise ArgumentError(f"order must be an integer >= 1, got {self.order!r}")
        if self.mode not in FILTER_MODES:
            raise ArgumentError(f"mode must be one of {FILTER_MODES}, got {self.mode!r}")

    def check(self, sample_rate: float):
        nyq = 0.5 * sample_rate
        if self.high_cut >= nyq:
            raise ArgumentError(
                f"high_cut={self.high_cut} Hz must be below Nyquist {nyq} Hz"
            )

    def sos(self, sample_rate: float) -> np.ndarray:
        self.check(sample_rate)
        return sps.butter(
            int(self.order),
            [self.low_cut, self.high_cut],
            btype="bandpass",
            output="sos",
            fs=sample_rate,
        )

    def to_dict(self) -> dict:
        return {
            "low_cut": self.low_cut,
            "high_cut": self.high_cut,
            "order": int(self.order),
            "mode": self.mode,
        }


def magnitude_response(spec: FilterSpec, sample_rate: float, freqs) -> np.ndarray:
    """Gain of the filter as applied, at ``freqs`` Hz.

    Zero-phase filtering runs the filter twice, so its gain is squared.
    """
    _, h = sps.sosfreqz(spec.sos(sample_rate), worN=np.atleast_1d(freqs), fs=sample_rate)
    gain = np.abs(h)
    return gain ** 2 if spec.mode == "zero-phase" else gain


def butterworth_bandpass(signal: Signal, spec: FilterSpec = FilterSpec()) -> Signal:
    """Bandpass-filter ``signal``; same length, rate and start time."""
    signal.require_nonempty()
    sos = spec.sos(signal.sample_rate)
    if spec.mode == "zero-phase":
        out = sps.sosfiltfilt(sos, signal.samples)
    else:
        out = sps.sosfilt(sos, signal.samples)
    return signal.with_samples(out, filter=spec.to_dict())


@dataclass(frozen=True)
class SpectrogramSpec:
    """Framing of the short-time power spectrum (lengths in samples)."""

    window_len: int = 1024
    hop: int = 256
    fft_len: int = 1024
    window_fn: str = "hann"

    def __post_init__(self):
        for name in ("window_len", "hop", "fft_len"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ArgumentError(f"{name} must be a positive integer, got {v!r}")
        if self.window_len > self.fft_len:
            raise ArgumentError(
                f"window_len={self.window_len} exceeds fft_len={self.fft_len}"
            )

    def taper(self) -> np.ndarray:
        try:
            return sps.get_window(self.window_fn, int(self.window_len), fftbins=True)
        except ValueError as exc:
            raise ArgumentError(f"unknown window function {self.window_fn!r}") from exc

    def to_dict(self) -> dict:
        return {
            "window_len": int(self.window_len),
            "hop": int(self.hop),
            "fft_len": int(self.fft_len),
            "window_fn": self.window_fn,
        }


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """One-sided power ``|DFT|^2``; ``power[k, m]`` is frame k, bin m.

    ``times`` are frame centres in s, ``freqs`` bin frequencies in Hz.
    """

    times: np.ndarray
    freqs: np.ndarray
    power: np.ndarray
    fft_len: int

    def frame_energy(self) -> np.ndarray:
        """Mean of the two-sided ``|X|^2`` over all ``fft_len`` bins.

        By Parseval this equals the energy of the tapered frame.
        """
        p = self.power
        inner = p[:, 1:-1] if self.fft_len % 2 == 0 else p[:, 1:]
        total = p[:, 0] + 2.0 * inner.sum(axis=1)
        if self.fft_len % 2 == 0:
            total = total + p[:, -1]
        return total / self.fft_len


def spectrogram(signal: Signal, spec: SpectrogramSpec = SpectrogramSpec()) -> Spectrogram:
    """Short-time power spectrum of ``signal``."""
    if len(signal) == 0:
        raise ArgumentError("cannot take the spectrogram of an empty signal")
    if len(signal) < spec.window_len:
        raise ArgumentError(
            f"signal has {len(signal)} samples, fewer than window_len={spec.window_len}"
        )
    taper = spec.taper()
    frames = np.lib.stride_tricks.sliding_window_view(signal.samples, spec.window_len)
    frames = frames[:: spec.hop]
    spec_c = np.fft.rfft(frames * taper, n=spec.fft_len, axis=1)
    power = spec_c.real ** 2 + spec_c.imag ** 2
    starts = np.arange(frames.shape[0]) * spec.hop
    times = signal.start_time + (starts + 0.5 * spec.window_len) / signal.sample_rate
    freqs = np.fft.rfftfreq(spec.fft_len, 1.0 / signal.sample_rate)
    return Spectrogram(times, freqs, power, int(spec.fft_len))


def extract_segment(
    signal: Signal, start: float, duration: float, relative: bool = False
) -> Signal:
    """Copy of ``duration`` seconds of ``signal`` beginning at ``start``.

    ``start`` is absolute time unless ``relative`` is set, in which case it
    is measured from the signal's first sample. The start is rounded to the
    nearest sample; the requested value is kept in the metadata.
    """
    if not (math.isfinite(start) and math.isfinite(duration)):
        raise ArgumentError("segment start and duration must be finite")
    if duration <= 0:
        raise ArgumentError(f"segment duration must be > 0, got {duration}")
    fs = signal.sample_rate
    offset = start if relative else start - signal.start_time
    i0 = int(round(offset * fs))
    n = int(round(duration * fs))
    if i0 < 0 or i0 + n > len(signal) or n < 1:
        raise ArgumentError(
            f"segment [{start}, {start + duration}] s "
            f"({'relative' if relative else 'absolute'}) lies outside the signal, "
            f"which covers {signal.duration} s from {signal.start_time} s"
        )
    md = dict(signal.metadata)
    md.update(segment_start_requested=float(start), segment_start_index=i0)
    return Signal(
        signal.samples[i0:i0 + n].copy(),
        fs,
        signal.start_time + i0 / fs,
        md,
    )
