"""Command-line front end.

Every subcommand is a thin client of the HTTP service: it reads local
files, calls the API (in-process by default, or a remote server via
``--server``), and writes the results back to disk. Subcommands:

    simulate   synthesize string telemetry (CSV) plus a truth sidecar (JSON)
    estimate   recover string resistance from telemetry
    design     fit a string-resistance distribution and emit thresholds
    evaluate   false-alarm / missed-detection table over a fault grid
    diagnose   stream verdicts for a telemetry file; exit code = worst verdict
    serve      run the HTTP service

The diagnose exit code is 0 for all-normal, 2 once a fault latched and
3 when no verdict ever left indeterminate.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .errors import CellstringError
from .telemetry import (read_json, read_telemetry_csv, write_estimator_trace_csv,
                        write_histogram_csv, write_json, write_telemetry_csv)


class CliError(Exception):
    """Fatal CLI problem already formatted for the user."""


class _InProcessTransport(httpx.BaseTransport):
    """Synchronous bridge into the ASGI app: no socket, same wire format."""

    def __init__(self, app):
        self._asgi = httpx.ASGITransport(app=app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        import asyncio

        async def go():
            resp = await self._asgi.handle_async_request(request)
            body = await resp.aread()
            return resp.status_code, resp.headers, body

        status, headers, body = asyncio.run(go())
        return httpx.Response(status, headers=headers, content=body)


def api_client(server: str | None) -> httpx.Client:
    """HTTP client against ``server``, or the in-process app when unset."""
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    from .service.app import app
    return httpx.Client(transport=_InProcessTransport(app),
                        base_url="http://cellstring.local", timeout=None)


def call(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise CliError(f"{path} failed ({resp.status_code}): {detail}")
    return resp.json()


# ---------------------------------------------------------------------------
# shared argument groups
# ---------------------------------------------------------------------------

def _add_population(p: argparse.ArgumentParser, required: bool = True):
    p.add_argument("--population", required=required,
                   help="'fresh', 'aged', or custom 'MU_OHM:SIGMA_OHM' (SI ohms)")


def parse_population(text: str) -> dict:
    if text in ("fresh", "aged"):
        from .stats import named_population
        pop = named_population(text)
        return {"mu_ohm": pop.mu_ohm, "sigma_ohm": pop.sigma_ohm, "label": pop.label}
    if ":" in text:
        mu_s, _, sigma_s = text.partition(":")
        try:
            return {"mu_ohm": float(mu_s), "sigma_ohm": float(sigma_s), "label": "custom"}
        except ValueError:
            pass
    raise CliError(f"bad population {text!r}; expected fresh, aged, or MU:SIGMA")


def _add_filter_kf(p: argparse.ArgumentParser):
    g = p.add_argument_group("filter")
    g.add_argument("--cutoff-hz", type=float, default=0.05, help="high-pass 3 dB cutoff")
    g.add_argument("--order", type=int, default=2, help="filter order")
    g = p.add_argument_group("estimator")
    g.add_argument("--rs0-ohm", type=float, default=10e-3)
    g.add_argument("--p0-var", type=float, default=(10e-3) ** 2)
    g.add_argument("--q-process", type=float, default=1e-14)
    g.add_argument("--r-meas", type=float, default=(1e-3) ** 2)
    g.add_argument("--i-min-a", type=float, default=0.05)
    g.add_argument("--conv-window-s", type=float, default=30.0)
    g.add_argument("--conv-tol-rel", type=float, default=1e-3)
    g.add_argument("--warmup-s", type=float, default=60.0)


def _filter_payload(args) -> dict:
    return {"cutoff_hz": args.cutoff_hz, "order": args.order}


def _kalman_payload(args) -> dict:
    return {
        "rs0_ohm": args.rs0_ohm, "p0_var": args.p0_var,
        "q_process": args.q_process, "r_meas": args.r_meas,
        "i_min_a": args.i_min_a, "conv_window_s": args.conv_window_s,
        "conv_tol_rel": args.conv_tol_rel, "warmup_s": args.warmup_s,
    }


def _parse_list(text: str, cast, what: str) -> list:
    try:
        return [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise CliError(f"bad {what} list {text!r}") from None


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args, client: httpx.Client) -> int:
    if (args.cells is None) == (args.population is None):
        raise CliError("simulate needs exactly one of --cells or --population")

    req: dict = {
        "soc0": args.soc0,
        "excitation": {
            "freq_hz": args.freq_hz, "amp_c": args.amp_c, "dc_c": args.dc_c,
            "duration_s": args.duration_s, "dt_s": args.dt_s,
        },
        "noise": {"v_std_v": args.noise_v_std, "i_std_a": args.noise_i_std},
        "seed": args.seed,
        "include_trace": args.trace is not None,
    }

    if args.cells is not None:
        from .cells import load_cell_file
        cells = load_cell_file(args.cells)
        if args.use:
            indices = _parse_list(args.use, int, "--use")
            try:
                cells = [cells[i - 1] for i in indices]
            except IndexError:
                raise CliError(f"--use index out of range for {args.cells} "
                               f"({len(cells)} cells)") from None
        req["cells"] = [
            {"rs_ohm": c.rs_ohm, "rt_ohm": c.rt_ohm, "tau_s": c.tau_s,
             "qb_ah": c.qb_ah, "eta": c.eta, "ocv_a": c.ocv_a,
             "ocv_b": c.ocv_b, "fade_pct": c.fade_pct}
            for c in cells
        ]
    else:
        string: dict = {
            "population": parse_population(args.population),
            "n_cells": args.n_cells,
            "sampled": args.sampled,
            "cell_seed": args.cell_seed,
        }
        if args.fault_delta is not None:
            string["fault"] = {"delta_rel": args.fault_delta,
                               "n_faulty": args.n_faulty,
                               "mode": args.fault_mode}
        req["string"] = string

    resp = call(client, "/simulate", req)
    write_telemetry_csv(args.out, resp["t_s"], resp["i_total_a"], resp["v_terminal_v"])
    truth_path = args.truth or default_truth_path(args.out)
    write_json(truth_path, resp["truth"])
    if args.trace is not None:
        _write_sim_trace(args.trace, resp)
    print(f"wrote {args.out} ({len(resp['t_s'])} samples) and {truth_path} "
          f"(truth {resp['truth']['theoretical_rs_ohm'] * 1e3:.4f} mOhm)")
    return 0


def default_truth_path(telemetry_path: str) -> str:
    p = Path(telemetry_path)
    return str(p.with_suffix("")) + ".truth.json"


def _write_sim_trace(path: str, resp: dict):
    import numpy as np

    from .strings import StringTrace, make_string
    from .cells import CellParams

    cells = [CellParams(**{k: v for k, v in c.items()}) for c in resp["truth"]["cells"]]
    trace = StringTrace(
        config=make_string(cells),
        t_s=np.asarray(resp["t_s"]),
        i_total_a=np.asarray(resp["i_total_a"]),
        v_terminal_v=np.asarray(resp["v_terminal_v"]),
        cell_currents_a=np.asarray(resp["trace"]["cell_currents_a"]),
        soc=np.asarray(resp["trace"]["soc"]),
    )
    from .telemetry import write_trace_csv
    write_trace_csv(path, trace)


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def cmd_estimate(args, client: httpx.Client) -> int:
    t, i, v = read_telemetry_csv(args.telemetry)
    truth_rs = _load_truth_rs(args)

    req = {
        "t_s": t.tolist(), "i_total_a": i.tolist(), "v_terminal_v": v.tolist(),
        "filter": _filter_payload(args), "kalman": _kalman_payload(args),
        "truth_rs_ohm": truth_rs,
        "include_trace": args.trace is not None,
    }
    resp = call(client, "/estimate", req)

    if args.trace is not None:
        write_estimator_trace_csv(args.trace, resp["trace"])
        resp.pop("trace")
    if args.report:
        resp.pop("trace", None)
        write_json(args.report, resp)

    line = (f"rs_hat = {resp['rs_hat_ohm'] * 1e3:.4f} mOhm, "
            f"converged = {resp['converged']}")
    if resp.get("convergence_time_s") is not None:
        line += f" at t = {resp['convergence_time_s']:.1f} s"
    if resp.get("error_pct") is not None:
        line += f", error vs truth = {resp['error_pct']:+.3f}%"
    print(line)
    return 0


def _load_truth_rs(args) -> float | None:
    path = args.truth
    if path is None:
        candidate = default_truth_path(args.telemetry)
        if Path(candidate).exists():
            path = candidate
    if path is None:
        return None
    try:
        truth = read_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read truth sidecar {path}: {exc}") from None
    if "theoretical_rs_ohm" not in truth:
        raise CliError(f"{path} has no theoretical_rs_ohm field")
    return truth["theoretical_rs_ohm"]


# ---------------------------------------------------------------------------
# design
# ---------------------------------------------------------------------------

def cmd_design(args, client: httpx.Client) -> int:
    req = {
        "population": parse_population(args.population),
        "n_cells": args.n_cells,
        "k_sigma": args.k_sigma,
        "n_mc": args.n_mc,
        "seed": args.seed,
        "n_workers": args.workers,
    }
    resp = call(client, "/design", req)
    hist = resp.pop("histogram")
    write_json(args.out, resp)
    if args.histogram:
        write_histogram_csv(args.histogram, hist["bin_edges_ohm"], hist["counts"])
    thr = resp["thresholds"]
    print(f"thresholds [{thr['lower_ohm'] * 1e3:.4f}, {thr['upper_ohm'] * 1e3:.4f}] mOhm "
          f"(mu_s = {thr['mu_s_ohm'] * 1e3:.4f} mOhm, kappa_s = {thr['kappa_s'] * 100:.3f}%), "
          f"false alarms = {resp['false_alarm']['rate'] * 100:.2f}%")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(args, client: httpx.Client) -> int:
    req = {
        "population": parse_population(args.population),
        "n_cells": _parse_list(args.n_cells, int, "--n-cells"),
        "deltas": _parse_list(args.deltas, float, "--deltas"),
        "modes": _parse_list(args.modes, str, "--modes"),
        "n_faulty": args.n_faulty,
        "k_sigma": args.k_sigma,
        "n_mc": args.n_mc,
        "seed": args.seed,
        "n_workers": args.workers,
    }
    if args.thresholds:
        req["thresholds"] = _read_thresholds(args.thresholds)
    resp = call(client, "/evaluate", req)
    write_json(args.out, resp)
    if args.csv:
        _write_rate_table(args.csv, resp["rows"])
    for row in resp["rows"]:
        print(f"n={row['n_cells']:<3d} delta={row['delta_rel']:<4g} mode={row['mode']:<7s} "
              f"MD = {row['md_rate'] * 100:6.2f}% (se {row['md_se'] * 100:.2f}pp)  "
              f"FA = {row['fa_rate'] * 100:5.2f}%")
    return 0


def _write_rate_table(path: str, rows: list[dict]):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("n_cells", "delta_rel", "mode", "md_rate", "md_se",
                    "fa_rate", "fa_se"))
        for r in rows:
            w.writerow((r["n_cells"], r["delta_rel"], r["mode"], r["md_rate"],
                        r["md_se"], r["fa_rate"], r["fa_se"]))


def _read_thresholds(path: str) -> dict:
    try:
        obj = read_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read thresholds {path}: {exc}") from None
    if "thresholds" in obj:  # full design report
        obj = obj["thresholds"]
    if "lower_ohm" not in obj or "upper_ohm" not in obj:
        raise CliError(f"{path} does not look like a thresholds file")
    return obj


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------

def cmd_diagnose(args, client: httpx.Client) -> int:
    t, i, v = read_telemetry_csv(args.telemetry)
    req = {
        "t_s": t.tolist(), "i_total_a": i.tolist(), "v_terminal_v": v.tolist(),
        "thresholds": _read_thresholds(args.thresholds),
        "filter": _filter_payload(args),
        "kalman": _kalman_payload(args),
        "persistence": args.persistence,
    }
    resp = call(client, "/diagnose", req)
    lines = [json.dumps(vd) for vd in resp["verdicts"]]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""))
    else:
        for line in lines:
            print(line)
    print(f"worst = {resp['worst_status']} "
          f"({len(resp['verdicts'])} verdicts)", file=sys.stderr)
    return resp["exit_code"]


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

def cmd_serve(args, client: httpx.Client) -> int:
    import uvicorn

    from .service.app import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellstring",
        description="Parallel battery-string simulation, resistance estimation, "
                    "threshold design, and online fault diagnosis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize telemetry for a cell string")
    p.add_argument("--cells", help="flat key/value cell config file")
    p.add_argument("--use", help="1-based cell indices from --cells, e.g. '1,2'")
    _add_population(p, required=False)
    p.add_argument("--n-cells", type=int, default=5, help="string size with --population")
    p.add_argument("--sampled", action="store_true",
                   help="draw cell resistances from the population instead of "
                        "placing all cells at the mean")
    p.add_argument("--cell-seed", type=int, default=0, help="seed for --sampled draws")
    p.add_argument("--fault-delta", type=float, default=None,
                   help="relative resistance increase of the faulty cell, e.g. 0.6")
    p.add_argument("--fault-mode", choices=("sampled", "mean"), default="sampled")
    p.add_argument("--n-faulty", type=int, default=1)
    p.add_argument("--soc0", type=float, default=1.0)
    p.add_argument("--freq-hz", type=float, default=0.5)
    p.add_argument("--amp-c", type=float, default=0.5)
    p.add_argument("--dc-c", type=float, default=0.5)
    p.add_argument("--duration-s", type=float, default=300.0)
    p.add_argument("--dt-s", type=float, default=0.1)
    p.add_argument("--noise-v-std", type=float, default=0.0, help="voltage sensor noise, V")
    p.add_argument("--noise-i-std", type=float, default=0.0, help="current sensor noise, A")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--out", required=True, help="telemetry CSV path")
    p.add_argument("--truth", help="truth sidecar path (default: <out>.truth.json)")
    p.add_argument("--trace", help="optional per-cell truth trace CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate string resistance from telemetry")
    p.add_argument("telemetry", help="telemetry CSV")
    p.add_argument("--truth", help="truth sidecar JSON (default: autodetect)")
    _add_filter_kf(p)
    p.add_argument("--report", help="write the full estimate report JSON here")
    p.add_argument("--trace", help="write per-sample estimator trace CSV here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("design", help="design fault thresholds for a population")
    _add_population(p)
    p.add_argument("--n-cells", type=int, required=True)
    p.add_argument("--k-sigma", type=float, default=2.0)
    p.add_argument("--n-mc", type=int, default=10000)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="thresholds JSON path")
    p.add_argument("--histogram", help="histogram CSV path")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("evaluate", help="false-alarm/missed-detection table")
    _add_population(p)
    p.add_argument("--n-cells", required=True, help="comma list, e.g. '5,10'")
    p.add_argument("--deltas", required=True, help="comma list, e.g. '0.6,1.0'")
    p.add_argument("--modes", default="sampled,mean",
                   help="fault interpretation modes to report")
    p.add_argument("--n-faulty", type=int, default=1)
    p.add_argument("--k-sigma", type=float, default=2.0)
    p.add_argument("--thresholds", help="use thresholds from this JSON instead of designing")
    p.add_argument("--n-mc", type=int, default=10000)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="also write the rate table as CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="run the online fault detector on telemetry")
    p.add_argument("telemetry", help="telemetry CSV")
    p.add_argument("--thresholds", required=True, help="thresholds JSON (design output)")
    _add_filter_kf(p)
    p.add_argument("--persistence", type=int, default=10,
                   help="consecutive out-of-band verdicts required to latch a fault")
    p.add_argument("--out", help="verdict JSON-lines path (default: stdout)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    for sp in sub.choices.values():
        sp.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        with api_client(getattr(args, "server", None)) as client:
            return args.func(args, client)
    except (CliError, CellstringError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
