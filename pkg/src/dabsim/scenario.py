"""Scenario configuration and batch execution.

A scenario is one fully-specified startup experiment: converter
parameters, modulator settings, dead-time strategy, solver knobs, and a
capture window. Scenarios live in flat dotted-key text files so runs
diff cleanly; every key has a default drawn from the 15 kW / 650 V
reference design, so an empty file is already a valid experiment.

Batch entry points (compare, sweep) run each scenario in a worker
thread, keep per-scenario outputs isolated, and assemble the merged
metrics table after the join.
"""

from __future__ import annotations

import concurrent.futures
import csv
import os
import re
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .analysis import (StartupMetrics, compute_metrics,
                       energy_balance_residual, phase_for_power)
from .circuit import DabParams, LoadModel
from .pwm import PwmConfig
from .softstart import StartupStrategy
from .solver import SolverConfig, WaveformTrace, simulate

__all__ = [
    "ConfigError",
    "RATED_POWER",
    "D_CMD_RATED",
    "Scenario",
    "ScenarioResult",
    "parse_config",
    "parse_value",
    "run_compare",
    "run_scenario",
    "run_sweep",
    "serialize_config",
    "set_key",
    "METRIC_COLUMNS",
    "SWEEPABLE_KEYS",
]

RATED_POWER = 15e3

# Phase-shift command that transfers rated power at the nominal 650/650
# operating point; held constant through startup.
D_CMD_RATED = phase_for_power(RATED_POWER, 650.0, 650.0, 1.0, 22e-6, 32e3)


class ConfigError(ValueError):
    """Malformed or invalid scenario configuration."""


# value parsers -------------------------------------------------------------

# Decimal exponents, not multipliers: "120 uF" must parse to the same
# float as a literal 120e-6, and a multiply can land one ulp off.
_SI_SUFFIXES = {
    "us": "e-6", "ns": "e-9", "ms": "e-3",
    "kHz": "e3", "uF": "e-6", "uH": "e-6",
}

_NAME_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")


def parse_value(text: str) -> float:
    """Parse a numeric config value with an optional SI-unit suffix."""
    s = text.strip()
    for suffix, exp in _SI_SUFFIXES.items():
        if s.endswith(suffix):
            head = s[: -len(suffix)].strip()
            if head:
                try:
                    float(head)
                except ValueError:
                    raise ConfigError(f"not a number: {text!r}") from None
                try:
                    return float(head + exp)
                except ValueError:
                    # head carries its own exponent ("1e3 kHz")
                    return float(head) * float("1" + exp)
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _parse_int(text: str) -> int:
    v = parse_value(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _parse_str(text: str) -> str:
    return text.strip()


# key registry --------------------------------------------------------------
# One entry per config key: the value parser and the default.

_KEYS: Dict[str, Tuple[Callable[[str], object], object]] = {
    "scenario.name": (_parse_str, "scenario"),
    "scenario.t_end": (parse_value, 2.0),
    "scenario.out_dir": (_parse_str, "out"),
    "circuit.v_bat": (parse_value, 650.0),
    "circuit.n": (parse_value, 1.0),
    "circuit.l_e": (parse_value, 22e-6),
    "circuit.c_out": (parse_value, 120e-6),
    "load.kind": (_parse_str, "none"),
    "load.r": (parse_value, 0.0),
    "load.i_o": (parse_value, 0.0),
    "pwm.f_sw": (parse_value, 32e3),
    "pwm.clk": (parse_value, 100e6),
    "pwm.d_cmd": (parse_value, D_CMD_RATED),
    "strategy.kind": (_parse_str, "variable_ramp"),
    "strategy.t_enable": (parse_value, 1.5),
    "strategy.t_d_final": (parse_value, 600e-9),
    "strategy.t_ramp": (parse_value, 150e-3),
    "strategy.t_d_large": (parse_value, 21.875e-6),
    "strategy.hold": (parse_value, 150e-3),
    "solver.dt_max": (parse_value, 156.25e-9),
    "solver.zc_tol": (parse_value, 1e-12),
    "solver.record_stride": (_parse_int, 8),
}

# Numeric knobs the sweep runner accepts.
SWEEPABLE_KEYS = (
    "strategy.t_ramp",
    "strategy.t_d_final",
    "strategy.t_enable",
    "circuit.v_bat",
    "circuit.l_e",
    "circuit.c_out",
    "load.r",
    "load.i_o",
    "pwm.d_cmd",
    "scenario.t_end",
)


@dataclass(frozen=True)
class Scenario:
    """One fully-specified startup experiment."""

    name: str
    params: DabParams
    pwm: PwmConfig
    startup: StartupStrategy
    solver: SolverConfig
    t_end: float
    out_dir: str

    def __post_init__(self) -> None:
        if not _NAME_RE.fullmatch(self.name):
            raise ValueError(f"scenario name {self.name!r} is not filesystem-safe")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be > 0, got {self.t_end}")
        if self.params.f_sw != self.pwm.f_sw:
            raise ValueError("circuit and modulator disagree on f_sw")
        # Building the schedule exercises every dead-time invariant.
        self.startup.schedule(self.pwm).validate_against(self.pwm)
        self.solver.validate_against(self.pwm)


def _build(values: Dict[str, object]) -> Scenario:
    load = LoadModel(kind=values["load.kind"], r=values["load.r"],
                     i_o=values["load.i_o"])
    params = DabParams(v_bat=values["circuit.v_bat"], n=values["circuit.n"],
                       l_e=values["circuit.l_e"], c_out=values["circuit.c_out"],
                       f_sw=values["pwm.f_sw"], load=load)
    pwm = PwmConfig(f_sw=values["pwm.f_sw"], clk=values["pwm.clk"],
                    phase_ratio=values["pwm.d_cmd"],
                    horizon=values["scenario.t_end"])
    startup = StartupStrategy(kind=values["strategy.kind"],
                              t_enable=values["strategy.t_enable"],
                              t_d_final=values["strategy.t_d_final"],
                              t_ramp=values["strategy.t_ramp"],
                              t_d_large=values["strategy.t_d_large"],
                              hold=values["strategy.hold"])
    solver = SolverConfig(dt_max=values["solver.dt_max"],
                          zc_tol=values["solver.zc_tol"],
                          record_stride=values["solver.record_stride"])
    return Scenario(name=values["scenario.name"], params=params, pwm=pwm,
                    startup=startup, solver=solver,
                    t_end=values["scenario.t_end"],
                    out_dir=values["scenario.out_dir"])


def parse_config(text: str) -> Scenario:
    """Parse a flat dotted-key config; missing keys take defaults.

    Unknown keys and malformed values are rejected with the offending
    line number; invariant violations surface with the violated rule.
    """
    values = {key: default for key, (_, default) in _KEYS.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        parser = _KEYS[key][0]
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    try:
        return _build(values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _flatten(sc: Scenario) -> Dict[str, object]:
    return {
        "scenario.name": sc.name,
        "scenario.t_end": sc.t_end,
        "scenario.out_dir": sc.out_dir,
        "circuit.v_bat": sc.params.v_bat,
        "circuit.n": sc.params.n,
        "circuit.l_e": sc.params.l_e,
        "circuit.c_out": sc.params.c_out,
        "load.kind": sc.params.load.kind,
        "load.r": sc.params.load.r,
        "load.i_o": sc.params.load.i_o,
        "pwm.f_sw": sc.pwm.f_sw,
        "pwm.clk": sc.pwm.clk,
        "pwm.d_cmd": sc.pwm.phase_ratio,
        "strategy.kind": sc.startup.kind,
        "strategy.t_enable": sc.startup.t_enable,
        "strategy.t_d_final": sc.startup.t_d_final,
        "strategy.t_ramp": sc.startup.t_ramp,
        "strategy.t_d_large": sc.startup.t_d_large,
        "strategy.hold": sc.startup.hold,
        "solver.dt_max": sc.solver.dt_max,
        "solver.zc_tol": sc.solver.zc_tol,
        "solver.record_stride": sc.solver.record_stride,
    }


def serialize_config(sc: Scenario) -> str:
    """Emit every key in registry order; parse(serialize(s)) == s."""
    flat = _flatten(sc)
    lines = [f"{key} = {flat[key]}" for key in _KEYS]
    return "\n".join(lines) + "\n"


def set_key(sc: Scenario, key: str, value: object) -> Scenario:
    """Return a copy of sc with one dotted config key replaced."""
    if key not in _KEYS:
        raise ConfigError(f"unknown key {key!r}")
    flat = _flatten(sc)
    flat[key] = value
    try:
        return _build(flat)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# execution -----------------------------------------------------------------

METRIC_COLUMNS = ("scenario", "status", "peak_i_l", "peak_i_cap", "v_final",
                  "overshoot_pct", "rise_time_10_90", "settling_time_2pct",
                  "energy_residual")


@dataclass(frozen=True)
class ScenarioResult:
    """Outcome of one scenario run; error is None on success."""

    scenario: Scenario
    trace: Optional[WaveformTrace]
    metrics: Optional[StartupMetrics]
    energy_residual: Optional[float]
    error: Optional[str]

    @property
    def ok(self) -> bool:
        return self.error is None

    def row(self) -> Dict[str, object]:
        cells: Dict[str, object] = {c: "" for c in METRIC_COLUMNS}
        cells["scenario"] = self.scenario.name
        cells["status"] = "ok" if self.ok else f"error: {self.error}"
        if self.metrics is not None:
            for k, v in self.metrics.as_dict().items():
                cells[k] = "" if v is None else v
            cells["energy_residual"] = self.energy_residual
        return cells


def _scenario_dir(sc: Scenario) -> str:
    path = os.path.join(sc.out_dir, sc.name)
    os.makedirs(path, exist_ok=True)
    return path


def _write_metrics_csv(path: str, rows: Sequence[Dict[str, object]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def run_scenario(sc: Scenario, write_outputs: bool = True,
                 make_plots: bool = True) -> ScenarioResult:
    """Simulate one scenario, extract metrics, emit CSV and plots."""
    sched = sc.startup.schedule(sc.pwm)
    trace = simulate(sc.params, sc.pwm, sched, sc.solver, sc.t_end)
    metrics = compute_metrics(trace, v_target=sc.params.v_bat / sc.params.n)
    residual = energy_balance_residual(trace, sc.params)
    if write_outputs:
        out = _scenario_dir(sc)
        trace.to_csv(os.path.join(out, "waveform.csv"))
        _write_metrics_csv(os.path.join(out, "metrics.csv"),
                           [ScenarioResult(sc, trace, metrics, residual, None).row()])
        with open(os.path.join(out, "scenario.cfg"), "w") as fh:
            fh.write(serialize_config(sc))
        if make_plots:
            from .plots import render_plots
            render_plots([(sc.name, trace)], os.path.join(out, "waveform.png"))
    return ScenarioResult(sc, trace, metrics, residual, None)


def _run_guarded(sc: Scenario, write_outputs: bool) -> ScenarioResult:
    try:
        # Plot rendering stays out of the workers; CSVs are isolated
        # per scenario, the figure backend is not.
        return run_scenario(sc, write_outputs=write_outputs, make_plots=False)
    except Exception as exc:  # reported per-row, never kills the batch
        return ScenarioResult(sc, None, None, None,
                              f"{type(exc).__name__}: {exc}")


def _run_batch(scenarios: Sequence[Scenario], write_outputs: bool,
               make_plots: bool) -> List[ScenarioResult]:
    workers = min(len(scenarios), os.cpu_count() or 1)
    if workers <= 1:
        results = [_run_guarded(sc, write_outputs) for sc in scenarios]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda sc: _run_guarded(sc, write_outputs), scenarios))
    if make_plots and write_outputs:
        from .plots import render_plots
        for r in results:
            if r.ok:
                out = _scenario_dir(r.scenario)
                render_plots([(r.scenario.name, r.trace)],
                             os.path.join(out, "waveform.png"))
    return results


def run_compare(scenarios: Sequence[Scenario], out_dir: Optional[str] = None,
                make_plots: bool = True) -> List[ScenarioResult]:
    """Run several strategies side by side and merge their metrics.

    All scenarios must share the converter parameters (that is the point
    of the comparison); a single scenario degenerates to a one-row table.
    """
    if not scenarios:
        raise ConfigError("compare needs at least one scenario")
    first = scenarios[0].params
    for sc in scenarios[1:]:
        if sc.params != first:
            raise ConfigError(
                f"scenario {sc.name!r} does not share the converter "
                f"parameters of {scenarios[0].name!r}")
    results = _run_batch(scenarios, write_outputs=True, make_plots=make_plots)
    out = out_dir or scenarios[0].out_dir
    os.makedirs(out, exist_ok=True)
    _write_metrics_csv(os.path.join(out, "compare_metrics.csv"),
                       [r.row() for r in results])
    if make_plots:
        from .plots import overlay_plot
        good = [(r.scenario.name, r.trace) for r in results if r.ok]
        if good:
            for signal in ("v_dc", "i_l", "i_cap"):
                overlay_plot(good, signal,
                             os.path.join(out, f"compare_{signal}.png"))
    return results


@dataclass(frozen=True)
class SweepResult:
    key: str
    values: Tuple[float, ...]
    results: Tuple[ScenarioResult, ...]
    peak_i_l_non_increasing: bool
    overshoot_non_increasing: bool


def _non_increasing(xs: Sequence[Optional[float]]) -> bool:
    seq = [x for x in xs if x is not None]
    return all(b <= a * (1 + 1e-12) for a, b in zip(seq, seq[1:]))


def run_sweep(base: Scenario, key: str, values: Sequence[float],
              out_dir: Optional[str] = None,
              make_plots: bool = True) -> SweepResult:
    """Re-run base with one knob swept over values; tabulate metrics."""
    if key not in SWEEPABLE_KEYS:
        raise ConfigError(f"key {key!r} is not sweepable; choose one of "
                          f"{', '.join(SWEEPABLE_KEYS)}")
    if not values:
        raise ConfigError("sweep needs a nonempty value list")
    safe = key.replace(".", "_")
    scenarios = [set_key(replace_name(base, f"{base.name}__{safe}_{i}"), key, v)
                 for i, v in enumerate(values)]
    results = _run_batch(scenarios, write_outputs=True, make_plots=False)
    out = out_dir or base.out_dir
    os.makedirs(out, exist_ok=True)
    rows = []
    for v, r in zip(values, results):
        row = r.row()
        row["scenario"] = f"{key}={v:g}"
        rows.append(row)
    _write_metrics_csv(os.path.join(out, "sweep_metrics.csv"), rows)
    peaks = [r.metrics.peak_i_l if r.ok else None for r in results]
    overs = [r.metrics.overshoot_pct if r.ok else None for r in results]
    if make_plots:
        from .plots import sweep_plot
        sweep_plot(values, peaks, overs, key, os.path.join(out, "sweep.png"))
    return SweepResult(key=key, values=tuple(values), results=tuple(results),
                       peak_i_l_non_increasing=_non_increasing(peaks),
                       overshoot_non_increasing=_non_increasing(overs))


def replace_name(sc: Scenario, name: str) -> Scenario:
    return replace(sc, name=name)
