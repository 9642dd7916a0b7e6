"""FastAPI service wrapping the core toolkit.

Stateless compute endpoints: every response is fully determined by the
request payload (seeds included), so the service can scale out behind a
load balancer and results stay reproducible.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..cells import CellParams
from ..diagnosis import VerdictStatus, exit_code, run_online
from ..errors import CellstringError
from ..estimator import ResistanceEstimator
from ..signals import HighPassFilter, generate_excitation
from ..stats import (FaultSpec, build_distribution, draw_cell_resistances,
                     false_alarm_rate, fit_and_thresholds, histogram,
                     missed_detection_rate, sample_stream)
from ..strings import make_string, simulate_string
from ..telemetry import config_hash, telemetry_rate
from . import schemas as sc

app = FastAPI(
    title="cellstring",
    version=__version__,
    description="Parallel battery-string simulation, resistance estimation, "
                "threshold design, and online fault diagnosis.",
)


@app.exception_handler(CellstringError)
async def _domain_error(request: Request, exc: CellstringError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health", response_model=sc.HealthResponse)
def health():
    return sc.HealthResponse(status="ok", version=__version__)


def _resolve_cells(req: sc.SimulateRequest) -> list[CellParams]:
    if req.cells is not None:
        return [c.to_params() for c in req.cells]
    spec = req.string
    pop = spec.population.to_population()
    if spec.sampled:
        rng = sample_stream(spec.cell_seed, 0)
        rs = draw_cell_resistances(pop, spec.n_cells, rng)
    else:
        rs = np.full(spec.n_cells, pop.mu_ohm)
    if spec.fault is not None:
        fault = spec.fault.to_fault()
        if fault.n_faulty > spec.n_cells:
            raise CellstringError("n_faulty exceeds n_cells")
        if fault.mode == "sampled":
            rs[:fault.n_faulty] *= 1.0 + fault.delta_rel
        else:
            rs[:fault.n_faulty] = (1.0 + fault.delta_rel) * pop.mu_ohm
    return [CellParams(rs_ohm=float(r)) for r in rs]


@app.post("/simulate", response_model=sc.SimulateResponse)
def simulate(req: sc.SimulateRequest):
    cells = _resolve_cells(req)
    config = make_string(cells)
    profile = req.excitation.to_profile()
    current = generate_excitation(profile, config.qb_total_ah)
    trace = simulate_string(config, current, profile.dt_s, soc0=req.soc0)

    i_meas = trace.i_total_a.copy()
    v_meas = trace.v_terminal_v.copy()
    if req.noise.v_std_v > 0 or req.noise.i_std_a > 0:
        rng = np.random.default_rng(req.seed)
        if req.noise.v_std_v > 0:
            v_meas = v_meas + rng.normal(0.0, req.noise.v_std_v, v_meas.size)
        if req.noise.i_std_a > 0:
            i_meas = i_meas + rng.normal(0.0, req.noise.i_std_a, i_meas.size)

    truth = sc.TruthInfo(
        theoretical_rs_ohm=trace.theoretical_resistance_ohm,
        cells=[sc.CellSpec.from_params(c) for c in cells],
        soc0=req.soc0,
        excitation=req.excitation,
        noise=req.noise,
        seed=req.seed,
        config_hash=config_hash(req.model_dump()),
    )
    trace_block = None
    if req.include_trace:
        trace_block = sc.TraceBlock(cell_currents_a=trace.cell_currents_a.tolist(),
                                    soc=trace.soc.tolist())
    return sc.SimulateResponse(
        t_s=trace.t_s.tolist(),
        i_total_a=i_meas.tolist(),
        v_terminal_v=v_meas.tolist(),
        truth=truth,
        trace=trace_block,
    )


@app.post("/estimate", response_model=sc.EstimateResponse)
def estimate(req: sc.EstimateRequest):
    t = np.asarray(req.t_s)
    sample_hz = telemetry_rate(t)
    filt_v = HighPassFilter(req.filter.cutoff_hz, sample_hz, req.filter.order)
    filt_i = filt_v.fresh()
    v_f = filt_v.process(req.v_terminal_v)
    i_f = filt_i.process(req.i_total_a)
    runner = ResistanceEstimator(req.kalman.to_config(), sample_hz,
                                 record=req.include_trace)
    est = runner.run(v_f, i_f)

    error_pct = None
    if req.truth_rs_ohm is not None and req.truth_rs_ohm > 0:
        error_pct = (est.rs_hat_ohm - req.truth_rs_ohm) / req.truth_rs_ohm * 100.0

    return sc.EstimateResponse(
        rs_hat_ohm=est.rs_hat_ohm,
        p_var_ohm2=est.p_var,
        n_updates=est.n_updates,
        n_rejected=est.n_rejected,
        converged=est.converged,
        convergence_time_s=est.convergence_time_s,
        n_samples=t.size,
        sample_hz=sample_hz,
        filter=sc.FilterBlock(cutoff_hz=filt_v.cutoff_hz, order=filt_v.order,
                              sample_hz=filt_v.sample_hz,
                              b=filt_v.b.tolist(), a=filt_v.a.tolist()),
        kalman=req.kalman,
        truth_rs_ohm=req.truth_rs_ohm,
        error_pct=error_pct,
        trace=[list(row) for row in runner.trace] if req.include_trace else None,
        config_hash=config_hash({"filter": req.filter.model_dump(),
                                 "kalman": req.kalman.model_dump()}),
    )


@app.post("/design", response_model=sc.DesignResponse)
def design(req: sc.DesignRequest):
    pop = req.population.to_population()
    dist = build_distribution(pop, req.n_cells, req.n_mc, req.seed, req.n_workers)
    thr = fit_and_thresholds(dist, req.k_sigma)
    # The false-alarm check draws an independent healthy sample set.
    fa = false_alarm_rate(pop, req.n_cells, thr, req.n_mc, req.seed + 1, req.n_workers)
    edges, counts = histogram(dist.samples)
    return sc.DesignResponse(
        population=req.population,
        n_cells=req.n_cells,
        thresholds=sc.ThresholdSpec.from_thresholds(thr, kappa_s=dist.kappa_s),
        false_alarm=sc.RateBlock(rate=fa.rate, se=fa.se, n_mc=fa.n_mc, seed=fa.seed),
        histogram=sc.HistogramBlock(bin_edges_ohm=edges.tolist(),
                                    counts=[int(c) for c in counts]),
        n_mc=req.n_mc,
        seed=req.seed,
        config_hash=config_hash(req.model_dump()),
    )


@app.post("/evaluate", response_model=sc.EvaluateResponse)
def evaluate(req: sc.EvaluateRequest):
    pop = req.population.to_population()
    rows: list[sc.EvaluateRow] = []
    thresholds_by_size: dict[str, sc.ThresholdSpec] = {}
    for n_cells in req.n_cells:
        if req.thresholds is not None:
            thr = req.thresholds.to_thresholds()
            thr_spec = req.thresholds
        else:
            dist = build_distribution(pop, n_cells, req.n_mc, req.seed, req.n_workers)
            thr = fit_and_thresholds(dist, req.k_sigma)
            thr_spec = sc.ThresholdSpec.from_thresholds(thr, kappa_s=dist.kappa_s)
        thresholds_by_size[str(n_cells)] = thr_spec
        fa = false_alarm_rate(pop, n_cells, thr, req.n_mc, req.seed + 1, req.n_workers)
        for delta in req.deltas:
            for mode in req.modes:
                fault = FaultSpec(delta_rel=delta, n_faulty=req.n_faulty, mode=mode)
                md = missed_detection_rate(pop, n_cells, fault, thr,
                                           req.n_mc, req.seed + 2, req.n_workers)
                rows.append(sc.EvaluateRow(
                    n_cells=n_cells, delta_rel=delta, mode=mode,
                    md_rate=md.rate, md_se=md.se, fa_rate=fa.rate, fa_se=fa.se,
                ))
    return sc.EvaluateResponse(
        population=req.population,
        k_sigma=None if req.thresholds is not None else req.k_sigma,
        n_mc=req.n_mc,
        seed=req.seed,
        rows=rows,
        thresholds_by_size=thresholds_by_size,
        config_hash=config_hash(req.model_dump()),
    )


@app.post("/diagnose", response_model=sc.DiagnoseResponse)
def diagnose(req: sc.DiagnoseRequest):
    t = np.asarray(req.t_s)
    sample_hz = telemetry_rate(t)
    verdicts = run_online(
        req.i_total_a, req.v_terminal_v,
        thresholds=req.thresholds.to_thresholds(),
        sample_hz=sample_hz,
        filter_cutoff_hz=req.filter.cutoff_hz,
        filter_order=req.filter.order,
        kalman=req.kalman.to_config(),
        persistence=req.persistence,
    )
    code = exit_code(verdicts)
    statuses = [v.status for v in verdicts]
    if any(s in (VerdictStatus.DEGRADATION_FAULT, VerdictStatus.LOW_RESISTANCE_FAULT)
           for s in statuses):
        worst = next(s for s in statuses
                     if s in (VerdictStatus.DEGRADATION_FAULT,
                              VerdictStatus.LOW_RESISTANCE_FAULT))
    elif VerdictStatus.NORMAL in statuses:
        worst = VerdictStatus.NORMAL
    else:
        worst = VerdictStatus.INDETERMINATE
    return sc.DiagnoseResponse(
        verdicts=[sc.VerdictOut(t_s=v.timestamp_s, status=v.status.value,
                                rs_hat_ohm=v.rs_hat_ohm, lower_ohm=v.lower_ohm,
                                upper_ohm=v.upper_ohm,
                                consecutive=v.consecutive_count)
                  for v in verdicts],
        worst_status=worst.value,
        exit_code=code,
        config_hash=config_hash({"thresholds": req.thresholds.model_dump(),
                                 "filter": req.filter.model_dump(),
                                 "kalman": req.kalman.model_dump(),
                                 "persistence": req.persistence}),
    )
