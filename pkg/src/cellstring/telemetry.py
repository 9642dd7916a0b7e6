"""Telemetry and report file formats.

Telemetry CSV is the two-sensor view of a string: header exactly
``t_s,i_total_a,v_terminal_v``, current positive on discharge. Floats
are written at 17 significant digits so a write/read round trip is
bit-lossless. Readers validate strict monotonic, uniform time spacing
and report problems with their file line.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TelemetryError

SCHEMA_VERSION = 1

TELEMETRY_HEADER = ("t_s", "i_total_a", "v_terminal_v")
HISTOGRAM_HEADER = ("bin_left_ohm", "bin_right_ohm", "count")
ESTIMATOR_TRACE_HEADER = ("t_s", "v_f", "i_f", "rs_hat_ohm", "p_var", "accepted")

_FMT = "%.17g"
_SPACING_TOL_S = 1e-6


@dataclass(frozen=True)
class TelemetrySample:
    """One timestamped reading of the string's two sensors."""

    t_s: float
    i_total_a: float
    v_terminal_v: float


def _fmt(x: float) -> str:
    return _FMT % x


def write_telemetry_csv(path, t_s, i_total_a, v_terminal_v):
    t = np.asarray(t_s, dtype=float)
    i = np.asarray(i_total_a, dtype=float)
    v = np.asarray(v_terminal_v, dtype=float)
    if not (t.shape == i.shape == v.shape):
        raise TelemetryError("t, i, v series must have equal length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TELEMETRY_HEADER)
        for k in range(t.size):
            w.writerow((_fmt(t[k]), _fmt(i[k]), _fmt(v[k])))


def read_telemetry_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise TelemetryError(f"cannot read telemetry {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TelemetryError(f"{path}: empty file, expected header "
                                 f"{','.join(TELEMETRY_HEADER)}") from None
        if tuple(h.strip() for h in header) != TELEMETRY_HEADER:
            raise TelemetryError(
                f"{path}:1: bad header {header!r}, expected {','.join(TELEMETRY_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise TelemetryError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1]), float(row[2])))
            except ValueError:
                raise TelemetryError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
    if not rows:
        empty = np.empty(0)
        return empty, empty.copy(), empty.copy()
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def telemetry_rate(t_s: np.ndarray, source: str = "telemetry") -> float:
    """Validate uniform, strictly increasing timestamps; returns sample_hz."""
    t = np.asarray(t_s, dtype=float)
    if t.size < 2:
        raise TelemetryError(f"{source}: need at least 2 samples to establish a rate")
    dt = np.diff(t)
    bad = np.where(dt <= 0)[0]
    if bad.size:
        k = int(bad[0])
        raise TelemetryError(f"{source}: time not strictly increasing at sample {k + 1} "
                             f"(t={t[k + 1]!r} after t={t[k]!r})")
    dt0 = float(np.median(dt))
    off = np.where(np.abs(dt - dt0) > _SPACING_TOL_S)[0]
    if off.size:
        k = int(off[0])
        raise TelemetryError(f"{source}: non-uniform sample spacing at sample {k + 1} "
                             f"(dt={dt[k]!r}, expected {dt0!r})")
    return 1.0 / dt0


def write_trace_csv(path, trace):
    """Full simulation truth trace with per-cell currents and SoC."""
    n = trace.cell_currents_a.shape[1]
    header = ["time_s", "i_total_a", "v_terminal_v"]
    header += [f"i_cell_{k + 1}_a" for k in range(n)]
    header += [f"soc_{k + 1}" for k in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(trace.t_s.size):
            row = [trace.t_s[k], trace.i_total_a[k], trace.v_terminal_v[k]]
            row += list(trace.cell_currents_a[k])
            row += list(trace.soc[k])
            w.writerow(_fmt(x) for x in row)


def write_estimator_trace_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ESTIMATOR_TRACE_HEADER)
        for t, v_f, i_f, rs, p, accepted in rows:
            w.writerow((_fmt(t), _fmt(v_f), _fmt(i_f), _fmt(rs), _fmt(p), accepted))


def write_histogram_csv(path, bin_edges, counts):
    edges = np.asarray(bin_edges, dtype=float)
    cts = np.asarray(counts)
    if edges.size != cts.size + 1:
        raise TelemetryError("bin_edges must have len(counts) + 1 entries")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTOGRAM_HEADER)
        for k in range(cts.size):
            w.writerow((_fmt(edges[k]), _fmt(edges[k + 1]), int(cts[k])))


def config_hash(payload) -> str:
    """Stable hash of a JSON-serializable config, for report provenance."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
