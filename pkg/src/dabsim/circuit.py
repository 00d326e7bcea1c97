"""Idealized dual active bridge power stage.

Two full bridges couple through a high-frequency transformer with series
leakage inductance; the secondary bridge feeds the DC-link capacitor and an
optional load. Devices are ideal switches with ideal antiparallel body
diodes: zero on-drop, zero forward drop, instant commutation. State is the
leakage current i_l (positive from primary leg A toward leg B) and the link
voltage v_dc.

The turns ratio n is defined the way the power transfer relation uses it:
the secondary bridge voltage reflects to the primary as v_s / n and the
link-side current is i_l / n. Table-style 1:1 designs have n = 1.

The fiddly part is the dead windows. A leg with both gates off steers its
current through whichever body diode the current sign forward-biases; at
exactly zero current the leg blocks, and the whole converter only leaves
the blocked state when the would-be drive can actually push current in a
self-consistent direction (strict inequality, so equal reflected voltages
stay blocked). Getting this wrong either fabricates inrush current or lets
the link charge through a path that does not exist.
"""

import enum
import math
from dataclasses import dataclass, field

from .pwm import GateVector


class ShootThroughError(RuntimeError):
    """Both switches of one leg commanded on: a short across the rail."""


class LegState(enum.Enum):
    HIGH = "high"                # high-side switch commanded on
    LOW = "low"                  # low-side switch commanded on
    DIODE_HIGH = "diode_high"    # high-side body diode carries the current
    DIODE_LOW = "diode_low"      # low-side body diode carries the current
    BLOCKED = "blocked"          # both off, zero current, no diode biased


# Leg states that tie the midpoint to the positive rail.
_HIGH_STATES = (LegState.HIGH, LegState.DIODE_HIGH)


@dataclass(frozen=True)
class LoadModel:
    """DC-link load. kind is one of none, resistive, constant_current."""

    kind: str = "none"
    r: float = 0.0      # ohm, resistive only
    i_o: float = 0.0    # A, constant_current only

    def __post_init__(self) -> None:
        if self.kind not in ("none", "resistive", "constant_current"):
            raise ValueError(f"unknown load kind {self.kind!r}")
        if self.kind == "resistive" and not self.r > 0:
            raise ValueError(f"resistive load needs r > 0, got {self.r}")
        if self.kind == "constant_current" and self.i_o < 0:
            raise ValueError(f"constant_current load needs i_o >= 0, got {self.i_o}")

    def current(self, v_dc: float) -> float:
        """Load current drawn from the link at voltage v_dc (A)."""
        if self.kind == "resistive":
            return v_dc / self.r
        if self.kind == "constant_current":
            return self.i_o
        return 0.0


@dataclass(frozen=True)
class DabParams:
    """Converter electrical parameters."""

    v_bat: float = 650.0            # source-side bridge rail voltage (V)
    n: float = 1.0                  # transformer turns ratio, see module docstring
    l_e: float = 22e-6              # series leakage inductance, primary referred (H)
    c_out: float = 120e-6           # DC-link capacitance (F)
    f_sw: float = 32e3              # switching frequency (Hz)
    load: LoadModel = field(default_factory=LoadModel)

    def __post_init__(self) -> None:
        for name in ("v_bat", "n", "l_e", "c_out", "f_sw"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class ConverterState:
    """Instantaneous electrical state."""

    t: float = 0.0      # s
    i_l: float = 0.0    # leakage inductor current (A)
    v_dc: float = 0.0   # DC-link voltage (V)


def resolve_leg(gate_high: bool, gate_low: bool, i_out: float,
                v_rail: float) -> tuple[LegState, float | None]:
    """Conduction state of one half-bridge leg.

    i_out is the current leaving the midpoint into the external circuit.
    With both gates off a positive i_out must be sourced through the
    low-side body diode (midpoint at 0), a negative one returns through the
    high-side diode (midpoint at the rail), and zero current blocks the leg
    leaving the midpoint voltage undefined (returned as None).
    """
    if gate_high and gate_low:
        raise ShootThroughError("both gates of one leg commanded on")
    if gate_high:
        return LegState.HIGH, v_rail
    if gate_low:
        return LegState.LOW, 0.0
    if i_out > 0:
        return LegState.DIODE_LOW, 0.0
    if i_out < 0:
        return LegState.DIODE_HIGH, v_rail
    return LegState.BLOCKED, None


def _bridge_factor(g_hi_a: bool, g_lo_a: bool, g_hi_b: bool, g_lo_b: bool,
                   i_a: float, i_b: float) -> tuple[int, LegState, LegState]:
    """Structural bridge factor: +1, 0 or -1 such that v = factor * rail.

    Evaluated from leg states, not voltages, so it stays meaningful when the
    rail happens to sit at zero volts.
    """
    st_a, _ = resolve_leg(g_hi_a, g_lo_a, i_a, 1.0)
    st_b, _ = resolve_leg(g_hi_b, g_lo_b, i_b, 1.0)
    fac = int(st_a in _HIGH_STATES) - int(st_b in _HIGH_STATES)
    return fac, st_a, st_b


@dataclass(frozen=True)
class Topology:
    """Resolved conduction pattern for a fixed gate vector and state.

    While conducting: v_p = p_factor * v_bat, the reflected secondary
    voltage is s_factor * v_dc / n, and the rectified link current is
    s_factor * i_l / n. While blocked, i_l is pinned at zero and the
    factors describe the commanded bridges only (used for trace output);
    a floating flag marks bridges whose midpoints are undefined.
    """

    conducting: bool
    p_factor: int
    s_factor: int
    legs: tuple[LegState, LegState, LegState, LegState]
    floating_primary: bool = False
    floating_secondary: bool = False

    @property
    def any_dead_leg(self) -> bool:
        """True if some leg relies on a diode, so an i_l sign change matters."""
        return any(s not in (LegState.HIGH, LegState.LOW) for s in self.legs)


def hypothetical_factors(gates: GateVector, sign: float) -> tuple[int, int]:
    """Bridge factors if the current flowed in the given direction.

    Used for the zero-current escape test: dead legs are resolved as if a
    current of the probed sign already flowed. The factors do not depend on
    the magnitude, only the sign.
    """
    m1, m2, m3, m4, m5, m6, m7, m8 = gates
    pf, _, _ = _bridge_factor(m1, m2, m3, m4, sign, -sign)
    sf, _, _ = _bridge_factor(m5, m6, m7, m8, -sign, sign)
    return pf, sf


def resolve_topology(gates: GateVector, i_l: float, v_dc: float,
                     p: DabParams) -> Topology:
    """Resolve all four legs given the state, including zero-current escape.

    With i_l nonzero every dead leg is steered by the current sign. At zero
    current the converter blocks unless one current direction is
    self-consistent: hypothesize the sign, resolve the diodes it would bias,
    and keep it only if the resulting loop voltage strictly pushes the
    current that way. At most one direction can pass that test.
    """
    m1, m2, m3, m4, m5, m6, m7, m8 = gates
    i_sec = i_l / p.n

    if i_l != 0.0:
        # Primary: leg A sources i_l, leg B sinks it. Secondary: the winding
        # pushes i_sec into leg A's midpoint and pulls it from leg B's.
        pf, st_a, st_b = _bridge_factor(m1, m2, m3, m4, i_l, -i_l)
        sf, st_c, st_d = _bridge_factor(m5, m6, m7, m8, -i_sec, i_sec)
        return Topology(True, pf, sf, (st_a, st_b, st_c, st_d))

    dead_primary = (not m1 and not m2) or (not m3 and not m4)
    dead_secondary = (not m5 and not m6) or (not m7 and not m8)

    if not dead_primary and not dead_secondary:
        pf, st_a, st_b = _bridge_factor(m1, m2, m3, m4, 0.0, 0.0)
        sf, st_c, st_d = _bridge_factor(m5, m6, m7, m8, 0.0, 0.0)
        return Topology(True, pf, sf, (st_a, st_b, st_c, st_d))

    for sign in (1.0, -1.0):
        pf, st_a, st_b = _bridge_factor(m1, m2, m3, m4, sign, -sign)
        sf, st_c, st_d = _bridge_factor(m5, m6, m7, m8, -sign, sign)
        drive = pf * p.v_bat - sf * v_dc / p.n
        if sign * drive > 0.0:
            return Topology(True, pf, sf, (st_a, st_b, st_c, st_d))

    # Blocked. Report commanded factors for the trace; a bridge with a dead
    # leg floats and couples the other side's drive through the transformer.
    def cmd_leg(gh: bool, gl: bool) -> LegState:
        st, _ = resolve_leg(gh, gl, 0.0, 1.0)
        return st

    legs = (cmd_leg(m1, m2), cmd_leg(m3, m4), cmd_leg(m5, m6), cmd_leg(m7, m8))
    pf = int(legs[0] is LegState.HIGH) - int(legs[1] is LegState.HIGH)
    sf = int(legs[2] is LegState.HIGH) - int(legs[3] is LegState.HIGH)
    return Topology(False, pf if not dead_primary else 0,
                    sf if not dead_secondary else 0, legs,
                    floating_primary=dead_primary,
                    floating_secondary=dead_secondary)


def primary_bridge_voltage(gates: GateVector, i_l: float,
                           v_bat: float) -> float | None:
    """Primary bridge output voltage, or None when both legs block."""
    m1, m2, m3, m4 = gates.m1, gates.m2, gates.m3, gates.m4
    st_a, va = resolve_leg(m1, m2, i_l, v_bat)
    st_b, vb = resolve_leg(m3, m4, -i_l, v_bat)
    if va is None or vb is None:
        # One leg blocked breaks the series path; with the loop current at
        # zero the bridge output is undefined.
        return None
    return va - vb


def secondary_network(gates: GateVector, i_l: float, v_dc: float,
                      n: float) -> tuple[float | None, float]:
    """Secondary bridge seen from the primary: (reflected voltage, i_rect).

    Returns the bridge voltage reflected through the transformer (v_s / n)
    and the current pumped into the DC link. With all secondary gates off
    the body diodes rectify: a nonzero current picks the diagonal that
    feeds the link, so i_rect = |i_l| / n. At zero current with no gates on
    the bridge blocks (reflected voltage None, i_rect 0); conduction can
    only restart when the primary drive reflected to the secondary exceeds
    v_dc strictly, which resolve_topology rules on.
    """
    m5, m6, m7, m8 = gates.m5, gates.m6, gates.m7, gates.m8
    i_sec = i_l / n
    st_c, _ = resolve_leg(m5, m6, -i_sec, v_dc)
    st_d, _ = resolve_leg(m7, m8, i_sec, v_dc)
    if st_c is LegState.BLOCKED or st_d is LegState.BLOCKED:
        return None, 0.0
    sf = int(st_c in _HIGH_STATES) - int(st_d in _HIGH_STATES)
    return sf * v_dc / n, sf * i_sec


def derivatives(state: ConverterState, v_p: float | None,
                sec: tuple[float | None, float],
                p: DabParams) -> tuple[float, float]:
    """State derivatives (di_l/dt, dv_dc/dt) for a resolved interval.

    A floating primary or a blocked secondary pins the inductor current, so
    its derivative is zero and the link only sees the load.
    """
    v_s_ref, i_rect = sec
    i_load = p.load.current(state.v_dc)
    if v_p is None or v_s_ref is None:
        return 0.0, -i_load / p.c_out
    di = (v_p - v_s_ref) / p.l_e
    dv = (i_rect - i_load) / p.c_out
    return di, dv


def source_current(topo: Topology, i_l: float) -> float:
    """Current drawn from the input source for a resolved topology (A)."""
    return topo.p_factor * i_l if topo.conducting else 0.0


def trace_voltages(topo: Topology, v_bat: float, v_dc: float,
                   n: float) -> tuple[float, float]:
    """(v_p, v_s) as an oscilloscope would see the winding terminals.

    Floating bridges show the other side's drive coupled through the
    transformer, or zero when nothing drives at all. v_s is the voltage at
    the secondary terminals, not the primary-referred value.
    """
    if topo.conducting:
        return topo.p_factor * v_bat, topo.s_factor * v_dc

    vp = 0.0 if topo.floating_primary else topo.p_factor * v_bat
    vs = 0.0 if topo.floating_secondary else topo.s_factor * v_dc
    if topo.floating_primary and not topo.floating_secondary:
        vp = vs / n
    elif topo.floating_secondary and not topo.floating_primary:
        vs = vp * n
    return vp, vs


def rectified_current(topo: Topology, i_l: float, n: float) -> float:
    """Current pumped into the DC link for a resolved topology (A)."""
    return topo.s_factor * i_l / n if topo.conducting else 0.0


def lc_frequency(p: DabParams) -> float:
    """Natural angular frequency of the leakage/link resonance (rad/s)."""
    return 1.0 / (p.n * math.sqrt(p.l_e * p.c_out))
