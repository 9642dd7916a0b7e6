"""First-order equivalent-circuit model of a single battery cell.

The cell is an SoC-dependent voltage source behind an ohmic resistance
and one RC pair. With current positive on discharge:

    v_oc = a * soc + b                         (linear OCV)
    v_b  = v_oc - rs * i_b - vc                (terminal voltage)
    vc'  = exp(-dt/tau) * vc
           + rt * (1 - exp(-dt/tau)) * i_b     (exact zero-order hold)
    soc' = soc - eta * i_b * dt / (3600 * qb)  (coulomb counting)

The RC state uses the exact ZOH solution rather than an Euler step, so
composing two half steps under constant current matches one full step
to rounding error.

Cell parameter sets can be loaded from a flat key/value config file
(see ``load_cell_file``); a four-cell reference set ships with the
package as ``table1.cfg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .errors import ConfigError, DomainError, NumericError

# SoC may overshoot [0, 1] slightly before the clamp engages; beyond
# this band the state is saturated and flagged instead of failing, so
# long batch runs never abort mid-way.
SOC_MAX = 1.05


@dataclass(frozen=True)
class CellParams:
    """Electrical parameters of one cell.

    Units: ohms, seconds, amp-hours, volts. ``fade_pct`` is a stored
    capacity-fade figure; it scales the effective capacity used by
    coulomb counting and nothing else.
    """

    rs_ohm: float                # ohmic (series) resistance
    rt_ohm: float = 0.010        # diffusion resistance of the RC pair
    tau_s: float = 30.0          # RC time constant
    qb_ah: float = 5.0           # nominal capacity
    eta: float = 1.0             # coulombic efficiency
    ocv_a: float = 0.8           # OCV slope (V per unit SoC)
    ocv_b: float = 3.3           # OCV intercept (V)
    fade_pct: float = 0.0        # capacity degradation, percent

    def __post_init__(self):
        if not (self.rs_ohm > 0):
            raise DomainError(f"rs_ohm must be > 0, got {self.rs_ohm}")
        if self.rt_ohm < 0:
            raise DomainError(f"rt_ohm must be >= 0, got {self.rt_ohm}")
        if not (self.tau_s > 0):
            raise DomainError(f"tau_s must be > 0, got {self.tau_s}")
        if not (self.qb_ah > 0):
            raise DomainError(f"qb_ah must be > 0, got {self.qb_ah}")
        if not (0.0 < self.eta <= 1.0):
            raise DomainError(f"eta must be in (0, 1], got {self.eta}")
        if self.ocv_a < 0:
            raise DomainError(f"ocv_a must be >= 0, got {self.ocv_a}")
        if not (0.0 <= self.fade_pct < 100.0):
            raise DomainError(f"fade_pct must be in [0, 100), got {self.fade_pct}")

    @property
    def qb_eff_ah(self) -> float:
        """Capacity after fade, the value coulomb counting runs on."""
        return self.qb_ah * (1.0 - self.fade_pct / 100.0)

    def with_rs(self, rs_ohm: float) -> "CellParams":
        return replace(self, rs_ohm=rs_ohm)


@dataclass
class CellState:
    """Dynamic state of one cell: RC-pair voltage and state of charge."""

    vc_volt: float = 0.0
    soc: float = 1.0
    clamped: bool = False  # set once SoC had to be saturated into [0, SOC_MAX]


def ocv(params: CellParams, soc: float) -> float:
    """Open-circuit voltage ``a * soc + b`` for soc in [0, 1]."""
    if not (0.0 <= soc <= 1.0):
        raise DomainError(f"soc must be in [0, 1], got {soc}")
    return params.ocv_a * soc + params.ocv_b


def _ocv_unchecked(params: CellParams, soc: float) -> float:
    # Internal evaluation tolerating the clamp band [0, SOC_MAX].
    return params.ocv_a * soc + params.ocv_b


def step_cell(params: CellParams, state: CellState, i_b_a: float, dt_s: float) -> CellState:
    """Advance one cell by ``dt_s`` under constant current ``i_b_a``.

    Positive current discharges. Exact ZOH update for the RC state,
    coulomb counting for SoC. SoC leaving [0, SOC_MAX] is saturated and
    the state flagged rather than raising.
    """
    if not (dt_s > 0):
        raise DomainError(f"dt_s must be > 0, got {dt_s}")
    if not (math.isfinite(i_b_a) and math.isfinite(dt_s)
            and math.isfinite(state.vc_volt) and math.isfinite(state.soc)):
        raise NumericError("non-finite input to step_cell")

    decay = math.exp(-dt_s / params.tau_s)
    vc = decay * state.vc_volt + params.rt_ohm * (1.0 - decay) * i_b_a
    soc = state.soc - params.eta * i_b_a * dt_s / (3600.0 * params.qb_eff_ah)

    clamped = state.clamped
    if soc < 0.0:
        soc = 0.0
        clamped = True
    elif soc > SOC_MAX:
        soc = SOC_MAX
        clamped = True
    return CellState(vc_volt=vc, soc=soc, clamped=clamped)


def terminal_voltage(params: CellParams, state: CellState, i_b_a: float) -> float:
    """Terminal voltage ``v_oc(soc) - rs * i_b - vc``."""
    if not math.isfinite(i_b_a):
        raise NumericError("non-finite current")
    return _ocv_unchecked(params, state.soc) - params.rs_ohm * i_b_a - state.vc_volt


# ---------------------------------------------------------------------------
# Flat key/value cell config files
#
# Format, one assignment per line, '#' starts a comment:
#
#     default.rt_ohm = 0.010
#     cell.1.rs_ohm  = 0.0058
#     cell.1.fade_pct = 0.0
#
# "default.<field>" applies to every cell that does not set the field
# itself. Cells are returned ordered by their index. Units are ohms,
# seconds and amp-hours, matching CellParams.
# ---------------------------------------------------------------------------

_FIELDS = ("rs_ohm", "rt_ohm", "tau_s", "qb_ah", "eta", "ocv_a", "ocv_b", "fade_pct")


def parse_cell_config(text: str, source: str = "<config>") -> list[CellParams]:
    defaults: dict[str, float] = {}
    cells: dict[int, dict[str, float]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            fvalue = float(value.strip())
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: value {value.strip()!r} is not a number") from None

        parts = key.split(".")
        if len(parts) == 2 and parts[0] == "default":
            field = parts[1]
            if field not in _FIELDS:
                raise ConfigError(f"{source}:{lineno}: unknown field {field!r}")
            defaults[field] = fvalue
        elif len(parts) == 3 and parts[0] == "cell":
            try:
                index = int(parts[1])
            except ValueError:
                raise ConfigError(f"{source}:{lineno}: bad cell index {parts[1]!r}") from None
            field = parts[2]
            if field not in _FIELDS:
                raise ConfigError(f"{source}:{lineno}: unknown field {field!r}")
            cells.setdefault(index, {})[field] = fvalue
        else:
            raise ConfigError(f"{source}:{lineno}: unrecognized key {key!r}")

    if not cells:
        raise ConfigError(f"{source}: no cell entries found")

    out = []
    for index in sorted(cells):
        fields = dict(defaults)
        fields.update(cells[index])
        if "rs_ohm" not in fields:
            raise ConfigError(f"{source}: cell {index} has no rs_ohm")
        try:
            out.append(CellParams(**fields))
        except DomainError as exc:
            raise ConfigError(f"{source}: cell {index}: {exc}") from None
    return out


def load_cell_file(path: str | Path) -> list[CellParams]:
    """Read a flat key/value cell config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read cell config {p}: {exc}") from None
    return parse_cell_config(text, source=str(p))


def builtin_cells() -> list[CellParams]:
    """The bundled four-cell reference set (table1.cfg)."""
    text = resources.files("cellstring.data").joinpath("table1.cfg").read_text()
    return parse_cell_config(text, source="table1.cfg")
