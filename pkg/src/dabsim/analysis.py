"""Cycle-averaged closed forms and startup waveform metrics.

The switching solver is exact within its model; everything here is the
companion algebra. The steady-state power law gives the operating-point
phase ratio and an independent cross-check for simulated transfer. The
averaged charging model (power law divided by link voltage, scaled by an
effective conduction ratio) is a deliberately approximate oracle: it
tracks the monotone envelope of a soft start but knows nothing about
switching ripple or diode blocking. Metric extraction is self-referential
by design: an open-loop startup settles wherever the physics says, so
v_final comes from the captured tail, not from a commanded target.

All functions are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, List, Optional

import numpy as np

from .circuit import DabParams
from .solver import WaveformTrace

__all__ = [
    "AveragedState",
    "StartupMetrics",
    "averaged_cap_current",
    "averaged_dvdc_dt",
    "cap_energy",
    "compute_metrics",
    "effective_conduction",
    "energy_balance_residual",
    "integrate_averaged_model",
    "phase_for_power",
    "power_sps",
]


def _check_phase(d: float) -> None:
    # D = 0.5 is the transfer maximum; beyond it the closed form is invalid.
    if abs(d) > 0.5:
        raise ValueError(f"phase ratio {d} outside [-0.5, 0.5]")


def power_sps(v_dc: float, v_bat: float, d: float, n: float,
              l_e: float, f_sw: float) -> float:
    """Steady-state transferred power under single-phase-shift modulation.

    Odd in d: negative phase ratio reverses the power direction.
    """
    _check_phase(d)
    return v_dc * v_bat * d * (1.0 - abs(d)) / (2.0 * n * l_e * f_sw)


def phase_for_power(p: float, v_dc: float, v_bat: float, n: float,
                    l_e: float, f_sw: float) -> float:
    """Smaller-magnitude phase ratio that transfers power p.

    Inverts power_sps. The quadratic d(1-|d|) admits two roots; the one
    below 0.25 is the practical operating point (less circulating
    current), so that branch is returned. Raises if |p| exceeds the
    |d| = 0.5 transfer maximum.
    """
    k = v_dc * v_bat / (2.0 * n * l_e * f_sw)
    x = abs(p) / k
    if x > 0.25:
        raise ValueError(f"power {p} W exceeds the transfer maximum {0.25 * k} W")
    d = 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * x))
    return math.copysign(d, p) if p else 0.0


def cap_energy(c_out: float, v_dc: float) -> float:
    """Energy stored in the output capacitance at the given link voltage."""
    if c_out <= 0.0:
        raise ValueError("c_out must be positive")
    return 0.5 * c_out * v_dc * v_dc


def averaged_cap_current(v_bat: float, d: float, n: float, l_e: float,
                         f_sw: float, i_o: float = 0.0) -> float:
    """Cycle-averaged capacitor charging current at full conduction.

    Transfer current minus load draw. Independent of the link voltage:
    with the load removed and d held fixed this predicts an unbounded
    linear charge, which is exactly what the switching model does once
    the dead window stops gating the transfer.
    """
    _check_phase(d)
    return v_bat * d * (1.0 - abs(d)) / (2.0 * n * l_e * f_sw) - i_o


def averaged_dvdc_dt(v_bat: float, d: float, n: float, l_e: float,
                     c_out: float, f_sw: float, i_o: float = 0.0) -> float:
    """Averaged link-voltage slope: averaged_cap_current over c_out."""
    return averaged_cap_current(v_bat, d, n, l_e, f_sw, i_o) / c_out


def effective_conduction(td_total: float, t_sw: float) -> float:
    """Fraction of the switching period not consumed by dead time.

    Linear reconstruction of the duty ratio seen by the power stage;
    feeds only the averaged oracle, never the switching model.
    """
    if td_total < 0.0 or td_total >= t_sw:
        raise ValueError(f"total dead time {td_total} outside [0, {t_sw})")
    d_eff = (t_sw - td_total) / t_sw
    return min(1.0, max(0.0, d_eff))


@dataclass(frozen=True)
class AveragedState:
    """One sample of the averaged charging model."""

    t: float
    v_dc: float


def integrate_averaged_model(p: DabParams,
                             d_of_t: Callable[[float], float],
                             d_eff_of_t: Callable[[float], float],
                             t_end: float,
                             dt: float,
                             v0: float = 0.0) -> List[AveragedState]:
    """Forward-Euler integration of the averaged charging model.

    The transfer term is scaled by the effective conduction ratio at
    each instant; the load draws its terminal current at the present
    link voltage. v_dc is clamped at zero: the averaged model has no
    notion of the diode bridge, so the clamp stands in for it.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    out = [AveragedState(0.0, v0)]
    v = v0
    t = 0.0
    while t < t_end:
        h = min(dt, t_end - t)
        i_net = (averaged_cap_current(p.v_bat, d_of_t(t), p.n, p.l_e, p.f_sw)
                 * d_eff_of_t(t) - p.load.current(v))
        v = max(0.0, v + h * i_net / p.c_out)
        t += h
        out.append(AveragedState(t, v))
    return out


@dataclass(frozen=True)
class StartupMetrics:
    """Peak and timing figures extracted from one captured startup.

    Timing metrics are measured against the self-settled v_final (mean
    of the trailing 5% of samples). overshoot_pct, rise_time_10_90 and
    settling_time_2pct are None when the trace gives them no meaning
    (v_final at zero, level never crossed, never settled).
    """

    peak_i_l: float
    peak_i_cap: float
    v_final: float
    overshoot_pct: Optional[float]
    rise_time_10_90: Optional[float]
    settling_time_2pct: Optional[float]

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def summary(self) -> str:
        """Human-readable block, one metric per line."""
        def fmt(x, unit):
            return "n/a" if x is None else f"{x:.6g} {unit}"
        return "\n".join([
            f"  peak |i_l|        : {fmt(self.peak_i_l, 'A')}",
            f"  peak |i_cap|      : {fmt(self.peak_i_cap, 'A')}",
            f"  v_final           : {fmt(self.v_final, 'V')}",
            f"  overshoot         : {fmt(self.overshoot_pct, '%')}",
            f"  rise time 10-90%  : {fmt(self.rise_time_10_90, 's')}",
            f"  settling time 2%  : {fmt(self.settling_time_2pct, 's')}",
        ])


def _first_crossing_time(t: np.ndarray, v: np.ndarray, level: float) -> Optional[float]:
    # First upward reach of `level`, linearly interpolated between samples.
    above = v >= level
    if not above.any():
        return None
    k = int(np.argmax(above))
    if k == 0:
        return float(t[0])
    dv = v[k] - v[k - 1]
    if dv <= 0.0:
        return float(t[k])
    frac = (level - v[k - 1]) / dv
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))


def compute_metrics(trace: WaveformTrace, v_target: float) -> StartupMetrics:
    """Extract StartupMetrics from a captured waveform.

    v_target scales the "effectively zero" test on v_final; all timing
    levels reference v_final itself.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    t, v = trace.t, trace.v_dc
    peak_i_l = float(np.max(np.abs(trace.i_l)))
    peak_i_cap = float(np.max(np.abs(trace.i_cap)))

    n_tail = max(1, int(math.ceil(0.05 * len(v))))
    v_final = float(np.mean(v[-n_tail:]))

    scale = max(abs(v_target), float(np.max(np.abs(v))), 1.0)
    if abs(v_final) <= 1e-9 * scale:
        return StartupMetrics(peak_i_l, peak_i_cap, v_final, None, None, None)

    overshoot = max(0.0, (float(np.max(v)) - v_final) / v_final * 100.0)

    t10 = _first_crossing_time(t, v, 0.1 * v_final)
    t90 = _first_crossing_time(t, v, 0.9 * v_final)
    rise = (t90 - t10) if (t10 is not None and t90 is not None) else None

    band = 0.02 * abs(v_final)
    outside = np.abs(v - v_final) > band
    if not outside.any():
        settle: Optional[float] = 0.0
    elif outside[-1]:
        settle = None
    else:
        last_out = len(v) - 1 - int(np.argmax(outside[::-1]))
        settle = float(t[last_out + 1] - t[0])

    return StartupMetrics(peak_i_l, peak_i_cap, v_final, overshoot, rise, settle)


def _load_current_series(p: DabParams, v_dc: np.ndarray) -> np.ndarray:
    if p.load.kind == "resistive":
        return v_dc / p.load.r
    if p.load.kind == "constant_current":
        return np.full_like(v_dc, p.load.i_o)
    return np.zeros_like(v_dc)


def energy_balance_residual(trace: WaveformTrace, p: DabParams) -> float:
    """Source energy minus stored-delta and load energy, trapezoidal.

    Zero for the lossless model up to quadrature error; the solver's
    double samples at every topology change keep the integrands free of
    hidden corners, so the estimate refines cleanly with record density.
    """
    if len(trace) < 2:
        return 0.0
    e_src = float(np.trapezoid(trace.v_p * trace.i_l, trace.t))
    de_l = 0.5 * p.l_e * float(trace.i_l[-1] ** 2 - trace.i_l[0] ** 2)
    de_c = 0.5 * p.c_out * float(trace.v_dc[-1] ** 2 - trace.v_dc[0] ** 2)
    i_load = _load_current_series(p, trace.v_dc)
    e_load = float(np.trapezoid(trace.v_dc * i_load, trace.t))
    return e_src - de_l - de_c - e_load
