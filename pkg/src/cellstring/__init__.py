"""cellstring: fault detection toolkit for parallel-connected battery cells.

Simulates equivalent-circuit cell strings behind a single voltage and a
single current sensor, estimates the string's high-frequency resistance
from high-pass-filtered telemetry, designs statistical fault thresholds
by Monte Carlo over cell-to-cell variation, and issues online verdicts.
"""

__version__ = "0.1.0"

from .cells import CellParams, CellState, builtin_cells, load_cell_file, ocv, step_cell, terminal_voltage
from .diagnosis import DiagnosisEngine, Verdict, VerdictStatus, classify, exit_code, run_online
from .errors import CellstringError, ConfigError, DomainError, NumericError, TelemetryError
from .estimator import KalmanConfig, ResistanceEstimate, ResistanceEstimator
from .signals import ExcitationProfile, HighPassFilter, design_highpass, filter_series, generate_excitation
from .stats import (AGED, FRESH, CellPopulation, FaultSpec, RateEstimate, StringDistribution,
                    ThresholdSet, build_distribution, draw_faulty, draw_healthy,
                    false_alarm_rate, fit_and_thresholds, missed_detection_rate,
                    sample_faulty_string, sample_healthy_string, sample_stream, size_sweep)
from .strings import (StringConfig, StringState, StringTrace, initial_state, make_string,
                      parallel_resistance, simulate_string, split_currents, step_string)

__all__ = [
    "__version__",
    "AGED", "FRESH",
    "CellParams", "CellState", "CellPopulation", "CellstringError", "ConfigError",
    "DiagnosisEngine", "DomainError", "ExcitationProfile", "FaultSpec",
    "HighPassFilter", "KalmanConfig", "NumericError", "RateEstimate",
    "ResistanceEstimate", "ResistanceEstimator", "StringConfig", "StringDistribution",
    "StringState", "StringTrace", "TelemetryError", "ThresholdSet", "Verdict",
    "VerdictStatus",
    "build_distribution", "builtin_cells", "classify", "design_highpass",
    "draw_faulty", "draw_healthy", "exit_code", "false_alarm_rate",
    "filter_series", "fit_and_thresholds", "generate_excitation", "initial_state",
    "load_cell_file", "make_string", "missed_detection_rate", "ocv",
    "parallel_resistance", "run_online", "sample_faulty_string",
    "sample_healthy_string", "sample_stream", "simulate_string", "size_sweep",
    "split_currents", "step_cell", "step_string", "terminal_voltage",
]
