"""Pydantic request/response models for the HTTP service.

These mirror the core dataclasses one-to-one so payloads validate at
the boundary and the handlers stay thin.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

from ..cells import CellParams
from ..estimator import KalmanConfig
from ..signals import ExcitationProfile
from ..stats import CellPopulation, FaultSpec, ThresholdSet
from ..telemetry import SCHEMA_VERSION


class CellSpec(BaseModel):
    rs_ohm: float
    rt_ohm: float = 0.010
    tau_s: float = 30.0
    qb_ah: float = 5.0
    eta: float = 1.0
    ocv_a: float = 0.8
    ocv_b: float = 3.3
    fade_pct: float = 0.0

    def to_params(self) -> CellParams:
        return CellParams(**self.model_dump())

    @classmethod
    def from_params(cls, p: CellParams) -> "CellSpec":
        return cls(rs_ohm=p.rs_ohm, rt_ohm=p.rt_ohm, tau_s=p.tau_s, qb_ah=p.qb_ah,
                   eta=p.eta, ocv_a=p.ocv_a, ocv_b=p.ocv_b, fade_pct=p.fade_pct)


class ExcitationSpec(BaseModel):
    freq_hz: float = 0.5
    amp_c: float = 0.5
    dc_c: float = 0.5
    duration_s: float = 300.0
    dt_s: float = 0.1

    def to_profile(self) -> ExcitationProfile:
        return ExcitationProfile(**self.model_dump())


class NoiseSpec(BaseModel):
    v_std_v: float = Field(0.0, ge=0.0)
    i_std_a: float = Field(0.0, ge=0.0)


class PopulationSpec(BaseModel):
    mu_ohm: float
    sigma_ohm: float
    label: str = "custom"

    def to_population(self) -> CellPopulation:
        return CellPopulation(mu_ohm=self.mu_ohm, sigma_ohm=self.sigma_ohm,
                              label=self.label)

    @classmethod
    def from_population(cls, pop: CellPopulation) -> "PopulationSpec":
        return cls(mu_ohm=pop.mu_ohm, sigma_ohm=pop.sigma_ohm, label=pop.label)


class FaultSpecIn(BaseModel):
    delta_rel: float
    n_faulty: int = 1
    mode: Literal["sampled", "mean"] = "sampled"

    def to_fault(self) -> FaultSpec:
        return FaultSpec(delta_rel=self.delta_rel, n_faulty=self.n_faulty,
                         mode=self.mode)


class StringFromPopulation(BaseModel):
    """Build a simulation string from a population instead of explicit cells.

    ``sampled=False`` places every cell at the population mean;
    ``sampled=True`` draws cell resistances from stream (cell_seed, 0).
    An optional fault scales the first cell(s).
    """

    population: PopulationSpec
    n_cells: int = Field(ge=1)
    sampled: bool = False
    cell_seed: int = 0
    fault: FaultSpecIn | None = None


class SimulateRequest(BaseModel):
    cells: list[CellSpec] | None = None
    string: StringFromPopulation | None = None
    soc0: float = 1.0
    excitation: ExcitationSpec = ExcitationSpec()
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0
    include_trace: bool = False

    @model_validator(mode="after")
    def _one_source(self):
        if (self.cells is None) == (self.string is None):
            raise ValueError("provide exactly one of 'cells' or 'string'")
        if self.cells is not None and len(self.cells) == 0:
            raise ValueError("'cells' must not be empty")
        return self


class TruthInfo(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: Literal["truth"] = "truth"
    theoretical_rs_ohm: float
    cells: list[CellSpec]
    soc0: float
    excitation: ExcitationSpec
    noise: NoiseSpec
    seed: int
    config_hash: str


class TraceBlock(BaseModel):
    """Noise-free per-cell truth trace, one row per sample."""

    cell_currents_a: list[list[float]]
    soc: list[list[float]]


class SimulateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    t_s: list[float]
    i_total_a: list[float]
    v_terminal_v: list[float]
    truth: TruthInfo
    trace: TraceBlock | None = None


class FilterSpec(BaseModel):
    cutoff_hz: float = 0.05
    order: int = 2


class FilterBlock(BaseModel):
    cutoff_hz: float
    order: int
    sample_hz: float
    b: list[float]
    a: list[float]


class KalmanSpec(BaseModel):
    rs0_ohm: float = 10e-3
    p0_var: float = (10e-3) ** 2
    q_process: float = 1e-14
    r_meas: float = (1e-3) ** 2
    i_min_a: float = 0.05
    conv_window_s: float = 30.0
    conv_tol_rel: float = 1e-3
    warmup_s: float = 60.0

    def to_config(self) -> KalmanConfig:
        return KalmanConfig(**self.model_dump())


class EstimateRequest(BaseModel):
    t_s: list[float]
    i_total_a: list[float]
    v_terminal_v: list[float]
    filter: FilterSpec = FilterSpec()
    kalman: KalmanSpec = KalmanSpec()
    truth_rs_ohm: float | None = None
    include_trace: bool = False

    @model_validator(mode="after")
    def _lengths(self):
        if not (len(self.t_s) == len(self.i_total_a) == len(self.v_terminal_v)):
            raise ValueError("t_s, i_total_a, v_terminal_v must have equal length")
        return self


class EstimateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    rs_hat_ohm: float
    p_var_ohm2: float
    n_updates: int
    n_rejected: int
    converged: bool
    convergence_time_s: float | None
    n_samples: int
    sample_hz: float
    filter: FilterBlock
    kalman: KalmanSpec
    truth_rs_ohm: float | None = None
    error_pct: float | None = None
    # Per-sample rows (t_s, v_f, i_f, rs_hat_ohm, p_var, accepted).
    trace: list[list[float]] | None = None
    config_hash: str


class RateBlock(BaseModel):
    rate: float
    se: float
    n_mc: int
    seed: int


class ThresholdSpec(BaseModel):
    lower_ohm: float
    upper_ohm: float
    k_sigma: float | None = None
    mu_s_ohm: float | None = None
    sigma_s_ohm: float | None = None
    kappa_s: float | None = None
    provenance: dict = Field(default_factory=dict)

    def to_thresholds(self) -> ThresholdSet:
        return ThresholdSet(
            lower_ohm=self.lower_ohm, upper_ohm=self.upper_ohm,
            k_sigma=self.k_sigma if self.k_sigma is not None else float("nan"),
            mu_s_ohm=self.mu_s_ohm if self.mu_s_ohm is not None else
            0.5 * (self.lower_ohm + self.upper_ohm),
            sigma_s_ohm=self.sigma_s_ohm if self.sigma_s_ohm is not None else 0.0,
            provenance=self.provenance,
        )

    @classmethod
    def from_thresholds(cls, thr: ThresholdSet, kappa_s: float | None = None) -> "ThresholdSpec":
        return cls(lower_ohm=thr.lower_ohm, upper_ohm=thr.upper_ohm,
                   k_sigma=thr.k_sigma, mu_s_ohm=thr.mu_s_ohm,
                   sigma_s_ohm=thr.sigma_s_ohm, kappa_s=kappa_s,
                   provenance=thr.provenance)


class HistogramBlock(BaseModel):
    bin_edges_ohm: list[float]
    counts: list[int]


class DesignRequest(BaseModel):
    population: PopulationSpec
    n_cells: int = Field(ge=1)
    k_sigma: float = 2.0
    n_mc: int = Field(10000, ge=100)
    seed: int = 12345
    n_workers: int = Field(1, ge=1)


class DesignResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: Literal["thresholds"] = "thresholds"
    population: PopulationSpec
    n_cells: int
    thresholds: ThresholdSpec
    false_alarm: RateBlock
    histogram: HistogramBlock
    n_mc: int
    seed: int
    config_hash: str


class EvaluateRequest(BaseModel):
    population: PopulationSpec
    n_cells: list[int]
    deltas: list[float]
    modes: list[Literal["sampled", "mean"]] = ["sampled", "mean"]
    n_faulty: int = 1
    k_sigma: float = 2.0
    thresholds: ThresholdSpec | None = None
    n_mc: int = Field(10000, ge=100)
    seed: int = 12345
    n_workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _sizes(self):
        if not self.n_cells:
            raise ValueError("n_cells must not be empty")
        if not self.deltas:
            raise ValueError("deltas must not be empty")
        if self.thresholds is not None and len(self.n_cells) != 1:
            raise ValueError("explicit thresholds only make sense for a single string size")
        return self


class EvaluateRow(BaseModel):
    n_cells: int
    delta_rel: float
    mode: str
    md_rate: float
    md_se: float
    fa_rate: float
    fa_se: float


class EvaluateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    population: PopulationSpec
    k_sigma: float | None
    n_mc: int
    seed: int
    rows: list[EvaluateRow]
    thresholds_by_size: dict[str, ThresholdSpec]
    config_hash: str


class DiagnoseRequest(BaseModel):
    t_s: list[float]
    i_total_a: list[float]
    v_terminal_v: list[float]
    thresholds: ThresholdSpec
    filter: FilterSpec = FilterSpec()
    kalman: KalmanSpec = KalmanSpec()
    persistence: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _lengths(self):
        if not (len(self.t_s) == len(self.i_total_a) == len(self.v_terminal_v)):
            raise ValueError("t_s, i_total_a, v_terminal_v must have equal length")
        return self


class VerdictOut(BaseModel):
    t_s: float
    status: str
    rs_hat_ohm: float
    lower_ohm: float
    upper_ohm: float
    consecutive: int


class DiagnoseResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    verdicts: list[VerdictOut]
    worst_status: str
    exit_code: int
    config_hash: str


class HealthResponse(BaseModel):
    status: str
    version: str
