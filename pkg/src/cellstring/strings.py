"""Parallel string of cells sharing one terminal voltage.

All cells see the same terminal voltage and the cell currents must sum
to the measured total. With the RC-pair voltage treated as a state
(frozen within a step), the per-step current split is linear:

    v   = (sum_i (v_oc_i - vc_i) / rs_i - i_total) / sum_i (1 / rs_i)
    i_i = (v_oc_i - vc_i - v) / rs_i

which conserves current by construction. The string's high-frequency
resistance is the plain parallel combination of the cell ohmic
resistances.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cells import SOC_MAX, CellParams, CellState
from .errors import DomainError, NumericError


def parallel_resistance(resistances) -> float:
    """Equivalent resistance ``1 / sum(1 / r_i)`` of parallel branches."""
    r = np.asarray(resistances, dtype=float)
    if r.size == 0:
        raise DomainError("parallel_resistance needs at least one resistance")
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise DomainError("resistances must be finite and > 0")
    return float(1.0 / np.sum(1.0 / r))


@dataclass(frozen=True)
class StringConfig:
    """An ordered collection of cells wired in parallel."""

    cells: tuple[CellParams, ...]

    def __post_init__(self):
        if len(self.cells) < 1:
            raise DomainError("a string needs at least one cell")

    @property
    def n(self) -> int:
        return len(self.cells)

    @property
    def theoretical_resistance_ohm(self) -> float:
        return parallel_resistance([c.rs_ohm for c in self.cells])

    @property
    def qb_total_ah(self) -> float:
        """Nominal string capacity; 1C excitation is sized against this."""
        return sum(c.qb_ah for c in self.cells)


def make_string(cells) -> StringConfig:
    return StringConfig(cells=tuple(cells))


@lru_cache(maxsize=64)
def _arrays(config: StringConfig) -> dict:
    return {
        "rs": np.array([c.rs_ohm for c in config.cells]),
        "rt": np.array([c.rt_ohm for c in config.cells]),
        "tau": np.array([c.tau_s for c in config.cells]),
        "qb_eff": np.array([c.qb_eff_ah for c in config.cells]),
        "eta": np.array([c.eta for c in config.cells]),
        "a": np.array([c.ocv_a for c in config.cells]),
        "b": np.array([c.ocv_b for c in config.cells]),
    }


@dataclass
class StringState:
    """Per-cell dynamic states plus the shared terminal quantities."""

    vc_volt: np.ndarray       # RC-pair voltage per cell
    soc: np.ndarray           # state of charge per cell
    v_terminal: float         # shared terminal voltage of the last solve
    cell_currents: np.ndarray  # per-cell currents of the last solve
    clamped: np.ndarray       # per-cell SoC saturation flags

    @property
    def cell_states(self) -> list[CellState]:
        return [
            CellState(vc_volt=float(v), soc=float(z), clamped=bool(c))
            for v, z, c in zip(self.vc_volt, self.soc, self.clamped)
        ]


def initial_state(config: StringConfig, soc0: float = 1.0) -> StringState:
    """Rested string at uniform SoC, RC pairs discharged."""
    if not (0.0 <= soc0 <= 1.0):
        raise DomainError(f"soc0 must be in [0, 1], got {soc0}")
    n = config.n
    state = StringState(
        vc_volt=np.zeros(n),
        soc=np.full(n, float(soc0)),
        v_terminal=0.0,
        cell_currents=np.zeros(n),
        clamped=np.zeros(n, dtype=bool),
    )
    v, i = split_currents(config, state, 0.0)
    state.v_terminal = v
    state.cell_currents = i
    return state


def split_currents(config: StringConfig, state: StringState, i_total_a: float):
    """Solve the equal-voltage current split for one instant.

    Returns ``(v_terminal, cell_currents)``; the currents sum to
    ``i_total_a`` to solver precision.
    """
    if not np.isfinite(i_total_a):
        raise NumericError("non-finite total current")
    p = _arrays(config)
    g = 1.0 / p["rs"]
    voc = p["a"] * state.soc + p["b"]
    v = (np.sum((voc - state.vc_volt) * g) - i_total_a) / np.sum(g)
    currents = (voc - state.vc_volt - v) * g
    return float(v), currents


def step_string(config: StringConfig, state: StringState, i_total_a: float,
                dt_s: float) -> StringState:
    """Advance the whole string one step under total current ``i_total_a``.

    The split is computed from the state at the start of the step, then
    every cell advances by its own branch current.
    """
    if not (dt_s > 0):
        raise DomainError(f"dt_s must be > 0, got {dt_s}")
    v, currents = split_currents(config, state, i_total_a)
    p = _arrays(config)
    decay = np.exp(-dt_s / p["tau"])
    vc = decay * state.vc_volt + p["rt"] * (1.0 - decay) * currents
    soc = state.soc - p["eta"] * currents * dt_s / (3600.0 * p["qb_eff"])

    clamped = state.clamped.copy()
    out_of_band = (soc < 0.0) | (soc > SOC_MAX)
    if out_of_band.any():
        clamped |= out_of_band
        soc = np.clip(soc, 0.0, SOC_MAX)
    return StringState(vc_volt=vc, soc=soc, v_terminal=v,
                       cell_currents=currents, clamped=clamped)


@dataclass
class StringTrace:
    """Time series produced by ``simulate_string``.

    ``v_terminal_v[k]`` is the terminal voltage while ``i_total_a[k]``
    flows, i.e. the pair a two-sensor telemetry system would log at
    ``t_s[k]``.
    """

    config: StringConfig
    t_s: np.ndarray
    i_total_a: np.ndarray
    v_terminal_v: np.ndarray
    cell_currents_a: np.ndarray  # shape (n_steps, n_cells)
    soc: np.ndarray              # shape (n_steps, n_cells)

    @property
    def theoretical_resistance_ohm(self) -> float:
        return self.config.theoretical_resistance_ohm


def simulate_string(config: StringConfig, i_total_a, dt_s: float,
                    soc0: float = 1.0) -> StringTrace:
    """Run the string over a sampled current profile.

    ``i_total_a[k]`` is held for ``[k*dt, (k+1)*dt)``; the recorded
    voltage at sample k belongs to that same interval.
    """
    if not (dt_s > 0):
        raise DomainError(f"dt_s must be > 0, got {dt_s}")
    i_total = np.asarray(i_total_a, dtype=float)
    if i_total.ndim != 1:
        raise DomainError("current profile must be one-dimensional")
    if i_total.size and not np.all(np.isfinite(i_total)):
        raise NumericError("current profile contains non-finite samples")

    p = _arrays(config)
    g = 1.0 / p["rs"]
    g_sum = np.sum(g)
    decay = np.exp(-dt_s / p["tau"])
    charge = 1.0 - decay
    soc_scale = p["eta"] * dt_s / (3600.0 * p["qb_eff"])

    n_steps = i_total.size
    n = config.n
    vc = np.zeros(n)
    soc = np.full(n, float(soc0))
    v_out = np.empty(n_steps)
    i_cells = np.empty((n_steps, n))
    soc_out = np.empty((n_steps, n))

    for k in range(n_steps):
        voc = p["a"] * soc + p["b"]
        head = voc - vc
        v = (np.sum(head * g) - i_total[k]) / g_sum
        currents = (head - v) * g
        v_out[k] = v
        i_cells[k] = currents
        soc_out[k] = soc
        vc = decay * vc + p["rt"] * charge * currents
        soc = np.clip(soc - soc_scale * currents, 0.0, SOC_MAX)

    t = np.arange(n_steps) * dt_s
    return StringTrace(config=config, t_s=t, i_total_a=i_total,
                       v_terminal_v=v_out, cell_currents_a=i_cells, soc=soc_out)
