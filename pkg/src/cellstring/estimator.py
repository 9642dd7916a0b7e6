"""Scalar Kalman filter for string resistance.

After high-pass filtering, voltage and current obey the static
regression ``v_f = -rs * i_f + noise``, so a one-state random-walk
Kalman filter recovers ``rs``:

    predict:  p <- p + q
    update:   h = -i_f
              k = p * h / (h * p * h + r)
              rs <- rs + k * (v_f - h * rs)
              p  <- (1 - k * h) * p

Updates run only when the filtered current is large enough to carry
information (|i_f| >= i_min); skipped samples still take the predict
step. Samples inside the filter warm-up window are discarded entirely.
Convergence is declared once the trailing window of accepted estimates
stays flat relative to the current value.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .errors import DomainError
from .signals import DEFAULT_WARMUP_S


@dataclass(frozen=True)
class KalmanConfig:
    """Tuning for the scalar resistance filter.

    The initial estimate is deliberately far from typical string values
    so convergence behaviour is observable; q is small but nonzero to
    keep slow drift trackable.
    """

    rs0_ohm: float = 10e-3        # initial resistance estimate
    p0_var: float = (10e-3) ** 2  # initial error variance, ohm^2
    q_process: float = 1e-14      # random-walk process noise per step, ohm^2
    r_meas: float = (1e-3) ** 2   # measurement noise variance, V^2
    i_min_a: float = 0.05         # minimum |i_f| for an update
    conv_window_s: float = 30.0   # trailing window for convergence
    conv_tol_rel: float = 1e-3    # max relative spread inside the window
    warmup_s: float = DEFAULT_WARMUP_S

    def __post_init__(self):
        if not (self.p0_var > 0 and self.r_meas > 0):
            raise DomainError("p0_var and r_meas must be > 0")
        if self.q_process < 0:
            raise DomainError("q_process must be >= 0")
        if not (self.i_min_a > 0):
            raise DomainError("i_min_a must be > 0")
        if not (self.conv_window_s > 0 and self.conv_tol_rel > 0):
            raise DomainError("convergence parameters must be > 0")
        if self.warmup_s < 0:
            raise DomainError("warmup_s must be >= 0")


@dataclass
class ResistanceEstimate:
    """Snapshot of the estimator state."""

    rs_hat_ohm: float
    p_var: float
    n_updates: int = 0
    n_rejected: int = 0
    converged: bool = False
    convergence_time_s: float | None = None
    warmup_remaining_s: float = 0.0


class ResistanceEstimator:
    """Consumes filtered (v, i) samples at a fixed rate, one per call.

    One instance per string; calls are strictly ordered. Set
    ``record=True`` to keep a per-sample trace for CSV export.
    """

    def __init__(self, cfg: KalmanConfig | None = None, sample_hz: float = 10.0,
                 record: bool = False):
        if not (sample_hz > 0):
            raise DomainError(f"sample_hz must be > 0, got {sample_hz}")
        self.cfg = cfg or KalmanConfig()
        self.sample_hz = float(sample_hz)
        self._dt = 1.0 / self.sample_hz
        self._t = 0.0
        self._rs = self.cfg.rs0_ohm
        self._p = self.cfg.p0_var
        self._n_updates = 0
        self._n_rejected = 0
        self._converged = False
        self._conv_time = None
        self._first_accept_t = None
        self._window: deque[tuple[float, float]] = deque()
        self.trace: list[tuple] | None = [] if record else None

    @property
    def estimate(self) -> ResistanceEstimate:
        return ResistanceEstimate(
            rs_hat_ohm=self._rs,
            p_var=self._p,
            n_updates=self._n_updates,
            n_rejected=self._n_rejected,
            converged=self._converged,
            convergence_time_s=self._conv_time,
            warmup_remaining_s=max(0.0, self.cfg.warmup_s - self._t),
        )

    def update(self, v_f: float, i_f: float) -> ResistanceEstimate:
        """Ingest one filtered sample pair; returns the new snapshot."""
        t = self._t
        self._t = t + self._dt
        accepted = False

        if t >= self.cfg.warmup_s:
            if not (math.isfinite(v_f) and math.isfinite(i_f)):
                self._n_rejected += 1
            else:
                self._p += self.cfg.q_process
                if abs(i_f) >= self.cfg.i_min_a:
                    h = -i_f
                    s = h * self._p * h + self.cfg.r_meas
                    k = self._p * h / s
                    self._rs = self._rs + k * (v_f - h * self._rs)
                    self._p = (1.0 - k * h) * self._p
                    self._n_updates += 1
                    accepted = True
                    self._track_convergence(t)

        if self.trace is not None:
            self.trace.append((t, v_f, i_f, self._rs, self._p, int(accepted)))
        return self.estimate

    def _track_convergence(self, t: float):
        if self._first_accept_t is None:
            self._first_accept_t = t
        win = self._window
        win.append((t, self._rs))
        horizon = t - self.cfg.conv_window_s
        while win and win[0][0] < horizon:
            win.popleft()
        if self._converged:
            return
        # Require the window to be genuinely populated: enough elapsed
        # time since the first update and a dense set of accepted
        # samples, so sparse bursts cannot fake convergence.
        min_count = max(2, int(0.5 * self.cfg.conv_window_s * self.sample_hz))
        if t - self._first_accept_t < self.cfg.conv_window_s or len(win) < min_count:
            return
        values = [rs for _, rs in win]
        spread = max(values) - min(values)
        if spread <= self.cfg.conv_tol_rel * abs(self._rs):
            self._converged = True
            self._conv_time = t

    def run(self, v_f, i_f) -> ResistanceEstimate:
        """Feed two equal-length series and return the final snapshot."""
        if len(v_f) != len(i_f):
            raise DomainError("v_f and i_f must have equal length")
        est = self.estimate
        for v, i in zip(v_f, i_f):
            est = self.update(float(v), float(i))
        return est
