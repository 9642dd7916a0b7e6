"""Online fault decision engine.

Consumes raw telemetry one sample at a time, runs the filter/estimator
pipeline, and emits a verdict once per second of stream time. A fault
verdict requires the estimator to have converged and the out-of-band
classification to persist for a configurable number of consecutive
verdicts, so single-sample excursions never trip it. Once a fault
latches it stays latched until an explicit reset (operational safety
bias: a fault that "heals" still warrants inspection).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .estimator import KalmanConfig, ResistanceEstimator
from .signals import HighPassFilter
from .stats import ThresholdSet


class VerdictStatus(str, Enum):
    NORMAL = "normal"
    DEGRADATION_FAULT = "degradation_fault"
    LOW_RESISTANCE_FAULT = "low_resistance_fault"
    INDETERMINATE = "indeterminate"


# Worst-verdict exit codes for batch runs.
EXIT_NORMAL = 0
EXIT_FAULT = 2
EXIT_INDETERMINATE = 3


def classify(rs_hat_ohm: float, thresholds: ThresholdSet) -> VerdictStatus:
    """Band position of a resistance value; the boundary is normal."""
    if not math.isfinite(rs_hat_ohm):
        return VerdictStatus.INDETERMINATE
    if rs_hat_ohm > thresholds.upper_ohm:
        return VerdictStatus.DEGRADATION_FAULT
    if rs_hat_ohm < thresholds.lower_ohm:
        return VerdictStatus.LOW_RESISTANCE_FAULT
    return VerdictStatus.NORMAL


@dataclass
class Verdict:
    timestamp_s: float
    status: VerdictStatus
    rs_hat_ohm: float
    lower_ohm: float
    upper_ohm: float
    consecutive_count: int

    def as_dict(self) -> dict:
        return {
            "t_s": self.timestamp_s,
            "status": self.status.value,
            "rs_hat_ohm": self.rs_hat_ohm,
            "lower_ohm": self.lower_ohm,
            "upper_ohm": self.upper_ohm,
            "consecutive": self.consecutive_count,
        }


class DiagnosisEngine:
    """One engine per string; strictly sequential per stream."""

    def __init__(self, thresholds: ThresholdSet, sample_hz: float,
                 filter_cutoff_hz: float = 0.05, filter_order: int = 2,
                 kalman: KalmanConfig | None = None, persistence: int = 10,
                 emit_period_s: float = 1.0):
        if persistence < 1:
            raise DomainError(f"persistence must be >= 1, got {persistence}")
        if not (emit_period_s > 0):
            raise DomainError(f"emit_period_s must be > 0, got {emit_period_s}")
        self.thresholds = thresholds
        self.sample_hz = float(sample_hz)
        self.persistence = int(persistence)
        self._filter_v = HighPassFilter(filter_cutoff_hz, sample_hz, filter_order)
        self._filter_i = self._filter_v.fresh()
        self._estimator = ResistanceEstimator(kalman, sample_hz)
        self._emit_every = max(1, int(round(emit_period_s * sample_hz)))
        self._n_samples = 0
        self._pending: VerdictStatus | None = None
        self._consecutive = 0
        self._latched: VerdictStatus | None = None

    @property
    def latched(self) -> VerdictStatus | None:
        return self._latched

    def reset_latch(self):
        self._latched = None
        self._pending = None
        self._consecutive = 0

    def push(self, i_total_a: float, v_terminal_v: float) -> Verdict | None:
        """Ingest one telemetry sample; a verdict comes back once per
        emission period, None otherwise."""
        v_f = self._filter_v.process([v_terminal_v])[0]
        i_f = self._filter_i.process([i_total_a])[0]
        est = self._estimator.update(v_f, i_f)
        self._n_samples += 1
        if self._n_samples % self._emit_every:
            return None
        t = self._n_samples / self.sample_hz
        return self.ingest_estimate(t, est.rs_hat_ohm, est.converged)

    def ingest_estimate(self, t_s: float, rs_hat_ohm: float,
                        converged: bool) -> Verdict:
        """Persistence and latching layer; exposed for direct testing."""
        thr = self.thresholds
        if self._latched is not None:
            return Verdict(t_s, self._latched, rs_hat_ohm,
                           thr.lower_ohm, thr.upper_ohm, self._consecutive)
        if not converged:
            self._pending = None
            self._consecutive = 0
            return Verdict(t_s, VerdictStatus.INDETERMINATE, rs_hat_ohm,
                           thr.lower_ohm, thr.upper_ohm, 0)

        raw = classify(rs_hat_ohm, thr)
        if raw is VerdictStatus.NORMAL:
            self._pending = None
            self._consecutive = 0
            return Verdict(t_s, VerdictStatus.NORMAL, rs_hat_ohm,
                           thr.lower_ohm, thr.upper_ohm, 0)

        if raw is self._pending:
            self._consecutive += 1
        else:
            self._pending = raw
            self._consecutive = 1
        if self._consecutive >= self.persistence:
            self._latched = raw
            return Verdict(t_s, raw, rs_hat_ohm,
                           thr.lower_ohm, thr.upper_ohm, self._consecutive)
        # Excursion not yet confirmed: still reported normal.
        return Verdict(t_s, VerdictStatus.NORMAL, rs_hat_ohm,
                       thr.lower_ohm, thr.upper_ohm, self._consecutive)

    def run(self, i_total_a, v_terminal_v) -> list[Verdict]:
        i_arr = np.asarray(i_total_a, dtype=float)
        v_arr = np.asarray(v_terminal_v, dtype=float)
        if i_arr.shape != v_arr.shape:
            raise DomainError("current and voltage series must have equal length")
        verdicts = []
        for i, v in zip(i_arr, v_arr):
            out = self.push(float(i), float(v))
            if out is not None:
                verdicts.append(out)
        return verdicts


def run_online(i_total_a, v_terminal_v, thresholds: ThresholdSet,
               sample_hz: float, filter_cutoff_hz: float = 0.05,
               filter_order: int = 2, kalman: KalmanConfig | None = None,
               persistence: int = 10) -> list[Verdict]:
    """Full online pipeline over a telemetry batch; one verdict per second."""
    engine = DiagnosisEngine(thresholds, sample_hz, filter_cutoff_hz,
                             filter_order, kalman, persistence)
    return engine.run(i_total_a, v_terminal_v)


def exit_code(verdicts) -> int:
    """Worst verdict of a batch: 0 normal, 2 fault, 3 indeterminate-only."""
    statuses = {v.status for v in verdicts}
    if VerdictStatus.DEGRADATION_FAULT in statuses or \
            VerdictStatus.LOW_RESISTANCE_FAULT in statuses:
        return EXIT_FAULT
    if VerdictStatus.NORMAL in statuses:
        return EXIT_NORMAL
    return EXIT_INDETERMINATE
