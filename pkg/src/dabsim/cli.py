"""Command-line front end: run, compare, sweep, validate.

Exit codes: 0 success, 1 scenario failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Sequence

import numpy as np

from .analysis import power_sps
from .circuit import ConverterState, DabParams, LoadModel
from .pwm import PwmConfig
from .scenario import (ConfigError, Scenario, parse_config, parse_value,
                       run_compare, run_scenario, run_sweep, set_key)
from .softstart import strategy_hard
from .solver import SolverConfig, simulate


def _load_scenario(path: str, out_override: Optional[str]) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    sc = parse_config(text)
    if out_override:
        sc = set_key(sc, "scenario.out_dir", out_override)
    return sc


def _cmd_run(args: argparse.Namespace) -> int:
    sc = _load_scenario(args.config, args.out)
    try:
        result = run_scenario(sc)
    except Exception as exc:
        print(f"scenario {sc.name!r} failed: {exc}", file=sys.stderr)
        return 1
    print(f"scenario {sc.name}: {len(result.trace)} samples to t={sc.t_end} s")
    print(result.metrics.summary())
    print(f"  energy residual   : {result.energy_residual:.6g} J")
    print(f"  outputs under     : {sc.out_dir}/{sc.name}/")
    if args.gates:
        from .plots import gate_zoom
        import os
        path = os.path.join(sc.out_dir, sc.name, "gates.png")
        gate_zoom(sc.pwm, sc.startup.schedule(sc.pwm),
                  t0=sc.startup.t_enable, periods=5, path=path)
        print(f"  gate zoom         : {path}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    scenarios = [_load_scenario(p, args.out) for p in args.configs]
    results = run_compare(scenarios, out_dir=args.out)
    width = max(len(r.scenario.name) for r in results)
    for r in results:
        if r.ok:
            m = r.metrics
            over = "n/a" if m.overshoot_pct is None else f"{m.overshoot_pct:.2f}%"
            print(f"  {r.scenario.name:<{width}}  peak_i_l={m.peak_i_l:10.2f} A"
                  f"  v_final={m.v_final:9.2f} V  overshoot={over}")
        else:
            print(f"  {r.scenario.name:<{width}}  {r.row()['status']}")
    return 0 if all(r.ok for r in results) else 1


def _cmd_sweep(args: argparse.Namespace) -> int:
    base = _load_scenario(args.config, args.out)
    try:
        values = [parse_value(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep value: {exc}") from exc
    sweep = run_sweep(base, args.key, values, out_dir=args.out)
    for v, r in zip(sweep.values, sweep.results):
        if r.ok:
            m = r.metrics
            over = "n/a" if m.overshoot_pct is None else f"{m.overshoot_pct:.2f}"
            print(f"  {args.key}={v:<12g} peak_i_l={m.peak_i_l:10.2f} A"
                  f"  overshoot={over}%")
        else:
            print(f"  {args.key}={v:<12g} {r.row()['status']}")
    print(f"  peak_i_l non-increasing : {sweep.peak_i_l_non_increasing}")
    print(f"  overshoot non-increasing: {sweep.overshoot_non_increasing}")
    return 0 if all(r.ok for r in sweep.results) else 1


def _pinned_power(d: float, td_total: float, n_periods: int = 40) -> float:
    """Cycle-averaged transferred power with the link held at 650 V.

    A very large pre-charged capacitance pins the voltage; the mean
    capacitor current over the settled back half is the transfer.
    """
    p = DabParams(v_bat=650.0, n=1.0, l_e=22e-6, c_out=10.0, f_sw=32e3,
                  load=LoadModel(kind="none"))
    pwm = PwmConfig(f_sw=32e3, clk=100e6, phase_ratio=d, horizon=1.0)
    sched = strategy_hard(t_enable=0.0, t_d_final=td_total).schedule(pwm)
    t_end = n_periods * pwm.t_sw
    tr = simulate(p, pwm, sched, SolverConfig(), t_end,
                  init=ConverterState(t=0.0, i_l=0.0, v_dc=650.0))
    m = tr.t >= (n_periods // 2) * pwm.t_sw
    span = tr.t[m][-1] - tr.t[m][0]
    return float(np.trapezoid(tr.v_dc[m] * tr.i_cap[m], tr.t[m]) / span)


def _cmd_validate(args: argparse.Namespace) -> int:
    print("steady-state power agreement, link pinned at 650 V, "
          "total dead time 600 ns:")
    worst = 0.0
    for d in (0.1, 0.2, 0.3, 0.4):
        ref = power_sps(650.0, 650.0, d, 1.0, 22e-6, 32e3)
        meas = _pinned_power(d, td_total=600e-9)
        err = abs(meas - ref) / ref
        worst = max(worst, err)
        print(f"  D={d:4.2f}  simulated={meas/1e3:8.3f} kW  "
              f"closed-form={ref/1e3:8.3f} kW  error={err*100:5.2f}%")
    ok = worst < 0.05
    print(f"worst error {worst*100:.2f}% against the 5% band: "
          f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dabsim",
        description="Switched-mode simulation of dual-active-bridge "
                    "startup with variable dead-time control.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override the output directory")
    p_run.add_argument("--gates", action="store_true",
                       help="also emit a gate-signal zoom at the enable instant")
    p_run.set_defaults(fn=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run several configs side by side")
    p_cmp.add_argument("configs", nargs="+")
    p_cmp.add_argument("--out", help="directory for the merged outputs")
    p_cmp.set_defaults(fn=_cmd_compare)

    p_swp = sub.add_parser("sweep", help="sweep one numeric config key")
    p_swp.add_argument("config")
    p_swp.add_argument("--key", required=True, help="dotted config key")
    p_swp.add_argument("--values", required=True,
                       help="comma-separated values, SI suffixes accepted")
    p_swp.add_argument("--out", help="override the output directory")
    p_swp.set_defaults(fn=_cmd_sweep)

    p_val = sub.add_parser(
        "validate", help="closed-form vs switching power agreement suite")
    p_val.set_defaults(fn=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
