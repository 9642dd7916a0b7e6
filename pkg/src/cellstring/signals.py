"""Excitation profiles and causal high-pass filtering.

The excitation is a sinusoid riding on a DC offset, both sized in
C-rate so the same profile scales to any string capacity. The filter is
a discrete Butterworth high-pass (bilinear transform with frequency
prewarping, so the 3 dB point lands exactly on the requested cutoff).
Filtering is causal and single-pass: the deployment target is an online
pipeline, and since voltage and current pass through identically
designed filters the common phase shift cancels in their ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as _sig

from .errors import ConfigError, DomainError

# Filtered output inside this window still carries the start-up
# transient and is excluded from estimator updates downstream.
DEFAULT_WARMUP_S = 60.0


@dataclass(frozen=True)
class ExcitationProfile:
    """Sinusoid plus DC discharge profile, amplitudes in C-rate."""

    freq_hz: float = 0.5
    amp_c: float = 0.5
    dc_c: float = 0.5
    duration_s: float = 300.0
    dt_s: float = 0.1

    def __post_init__(self):
        if not (self.freq_hz > 0):
            raise ConfigError(f"freq_hz must be > 0, got {self.freq_hz}")
        if not (self.dt_s > 0):
            raise ConfigError(f"dt_s must be > 0, got {self.dt_s}")
        if self.dt_s > 1.0 / (10.0 * self.freq_hz):
            raise ConfigError(
                f"dt_s={self.dt_s} undersamples {self.freq_hz} Hz; "
                f"need at least 10 samples per period"
            )
        if self.duration_s < 0:
            raise ConfigError(f"duration_s must be >= 0, got {self.duration_s}")

    @property
    def sample_hz(self) -> float:
        return 1.0 / self.dt_s

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s / self.dt_s))

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt_s


def generate_excitation(profile: ExcitationProfile, qb_ah: float) -> np.ndarray:
    """Current samples in amps, positive = discharge; 1C = ``qb_ah`` amps."""
    if not (qb_ah > 0):
        raise DomainError(f"qb_ah must be > 0, got {qb_ah}")
    t = profile.times()
    return qb_ah * (profile.dc_c + profile.amp_c * np.sin(2.0 * np.pi * profile.freq_hz * t))


class HighPassFilter:
    """Causal Butterworth high-pass with per-stream delay-line state.

    One instance serves exactly one stream; use :meth:`fresh` to get an
    identically designed filter with cleared state for a second stream.
    """

    def __init__(self, cutoff_hz: float, sample_hz: float, order: int = 2):
        if order < 1:
            raise DomainError(f"order must be >= 1, got {order}")
        if not (sample_hz > 0):
            raise DomainError(f"sample_hz must be > 0, got {sample_hz}")
        if not (0.0 < cutoff_hz < sample_hz / 2.0):
            raise DomainError(
                f"cutoff_hz must sit inside (0, Nyquist={sample_hz / 2.0}), got {cutoff_hz}"
            )
        self.cutoff_hz = float(cutoff_hz)
        self.sample_hz = float(sample_hz)
        self.order = int(order)
        self.b, self.a = _sig.butter(self.order, self.cutoff_hz,
                                     btype="highpass", fs=self.sample_hz)
        self._zi = np.zeros(max(len(self.a), len(self.b)) - 1)

    def process(self, x) -> np.ndarray:
        """Filter a chunk, carrying state across calls."""
        x = np.asarray(x, dtype=float)
        y, self._zi = _sig.lfilter(self.b, self.a, x, zi=self._zi)
        return y

    def reset(self):
        self._zi = np.zeros_like(self._zi)

    def fresh(self) -> "HighPassFilter":
        return HighPassFilter(self.cutoff_hz, self.sample_hz, self.order)

    def gain_at(self, freq_hz: float) -> float:
        w = 2.0 * np.pi * freq_hz / self.sample_hz
        _, h = _sig.freqz(self.b, self.a, worN=[w])
        return float(np.abs(h[0]))

    @property
    def dc_gain(self) -> float:
        return float(np.sum(self.b) / np.sum(self.a))

    def describe(self) -> str:
        """Canonical text block pinning the exact discrete design."""
        lines = [
            "filter: butterworth highpass",
            f"cutoff_hz: {self.cutoff_hz:.17g}",
            f"order: {self.order}",
            f"sample_hz: {self.sample_hz:.17g}",
            "b: " + " ".join(f"{c:.17g}" for c in self.b),
            "a: " + " ".join(f"{c:.17g}" for c in self.a),
        ]
        return "\n".join(lines)


def design_highpass(cutoff_hz: float, sample_hz: float, order: int = 2) -> HighPassFilter:
    return HighPassFilter(cutoff_hz, sample_hz, order)


def filter_series(filt: HighPassFilter, x) -> np.ndarray:
    """Causal single-pass filtering of a series through ``filt``'s state."""
    return filt.process(x)
