"""Static figure emission for captured waveforms and gate streams.

Everything renders through the Agg backend to PNG files; figures are a
reporting surface, not an operator UI. Layouts follow the usual
power-stage convention: stacked signal rows, one column per compared
startup, shared row scales so peak comparisons read honestly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pwm import (EdgeSchedule, PwmConfig, ScheduleLike, build_gate_schedule,
                  scheduled_dead_time)
from .solver import WaveformTrace

__all__ = ["PlotStyle", "gate_zoom", "overlay_plot", "render_plots",
           "sweep_plot"]

_SIGNAL_ROWS = (
    ("v_dc", "v_dc (V)"),
    ("i_l", "i_l (A)"),
    ("i_cap", "i_cap (A)"),
    ("td", "dead time (s)"),
)


@dataclass(frozen=True)
class PlotStyle:
    """Figure geometry knobs; defaults suit a two-column comparison."""

    col_width: float = 5.2
    row_height: float = 1.8
    dpi: int = 110


def _finish(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    try:
        fig.savefig(path)
    except OSError as exc:
        raise OSError(f"could not write figure {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def render_plots(traces: Sequence[Tuple[str, WaveformTrace]], path: str,
                 style: PlotStyle = PlotStyle()) -> str:
    """Multi-panel waveform figure: signal rows by scenario columns."""
    if not traces:
        raise ValueError("no traces to plot")
    ncols = len(traces)
    nrows = len(_SIGNAL_ROWS)
    fig, axes = plt.subplots(
        nrows, ncols, sharex="col", sharey="row", squeeze=False,
        figsize=(style.col_width * ncols, style.row_height * nrows),
        dpi=style.dpi)
    for col, (label, tr) in enumerate(traces):
        axes[0][col].set_title(label)
        for row, (attr, ylabel) in enumerate(_SIGNAL_ROWS):
            ax = axes[row][col]
            ax.plot(tr.t, getattr(tr, attr), linewidth=0.7)
            ax.grid(True, alpha=0.3)
            if col == 0:
                ax.set_ylabel(ylabel)
        axes[-1][col].set_xlabel("t (s)")
    fig.tight_layout()
    return _finish(fig, path)


def overlay_plot(traces: Sequence[Tuple[str, WaveformTrace]], signal: str,
                 path: str, style: PlotStyle = PlotStyle()) -> str:
    """All traces of one signal on a single axes."""
    if not traces:
        raise ValueError("no traces to plot")
    labels = dict(_SIGNAL_ROWS)
    if signal not in labels:
        raise ValueError(f"unknown signal {signal!r}")
    fig, ax = plt.subplots(figsize=(2 * style.col_width, 3 * style.row_height),
                           dpi=style.dpi)
    for label, tr in traces:
        ax.plot(tr.t, getattr(tr, signal), linewidth=0.8, label=label)
    ax.set_xlabel("t (s)")
    ax.set_ylabel(labels[signal])
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    return _finish(fig, path)


def _gate_steps(sched: EdgeSchedule, gate: int, t0: float,
                t1: float) -> Tuple[np.ndarray, np.ndarray]:
    # Replay one gate's edges into a step waveform over [t0, t1].
    times = sched.times()
    mask = sched.gate == gate
    gt = times[mask]
    gr = sched.rising[mask]
    before = gt <= t0
    state = bool(gr[before][-1]) if before.any() else False
    inside = (gt > t0) & (gt <= t1)
    t = np.concatenate(([t0], gt[inside], [t1]))
    levels = np.concatenate(([state], gr[inside], [False]))
    return t, levels.astype(float)


def gate_zoom(pwm: PwmConfig, sched: ScheduleLike, t0: float, periods: int,
              path: str, style: PlotStyle = PlotStyle()) -> str:
    """Three-panel gate view: primary gates, secondary gates, dead time.

    Zooming a few periods into the early ramp shows the narrow pulses
    and wide dead bands directly.
    """
    t1 = t0 + periods * pwm.t_sw
    edges = build_gate_schedule(pwm, sched, horizon=t1)
    fig, (ax_p, ax_s, ax_d) = plt.subplots(
        3, 1, sharex=True, figsize=(2 * style.col_width, 5 * style.row_height),
        dpi=style.dpi)
    for ax, gates, title in ((ax_p, (1, 2, 3, 4), "primary bridge gates"),
                             (ax_s, (5, 6, 7, 8), "secondary bridge gates")):
        for k, g in enumerate(gates):
            t, lv = _gate_steps(edges, g, t0, t1)
            offset = (len(gates) - 1 - k) * 1.5
            ax.step(t, lv + offset, where="post", linewidth=0.9)
            ax.text(t0, offset + 1.05, f"M{g}", fontsize=8, va="bottom")
        ax.set_yticks([])
        ax.set_title(title, fontsize=9)
        ax.grid(True, axis="x", alpha=0.3)
    ts = np.linspace(t0, t1, 512)
    ax_d.plot(ts, scheduled_dead_time(sched, ts), linewidth=0.9)
    ax_d.set_ylabel("total dead time (s)")
    ax_d.set_xlabel("t (s)")
    ax_d.grid(True, alpha=0.3)
    fig.tight_layout()
    return _finish(fig, path)


def sweep_plot(values: Sequence[float], peaks: Sequence[Optional[float]],
               overshoots: Sequence[Optional[float]], key: str, path: str,
               style: PlotStyle = PlotStyle()) -> str:
    """Peak current and overshoot against the swept parameter."""
    fig, (ax_p, ax_o) = plt.subplots(
        2, 1, sharex=True, figsize=(2 * style.col_width, 4 * style.row_height),
        dpi=style.dpi)
    for ax, ys, ylabel in ((ax_p, peaks, "peak |i_l| (A)"),
                           (ax_o, overshoots, "overshoot (%)")):
        pairs = [(v, y) for v, y in zip(values, ys) if y is not None]
        if pairs:
            xs, ysv = zip(*pairs)
            ax.plot(xs, ysv, marker="o", linewidth=0.9)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
    ax_o.set_xlabel(key)
    fig.tight_layout()
    return _finish(fig, path)
