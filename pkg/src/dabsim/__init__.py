"""Switched-waveform simulator for dual active bridge soft start studies."""

from .analysis import (AveragedState, StartupMetrics, averaged_cap_current,
                       averaged_dvdc_dt, cap_energy, compute_metrics,
                       effective_conduction, energy_balance_residual,
                       integrate_averaged_model, phase_for_power, power_sps)
from .circuit import (ConverterState, DabParams, LegState, LoadModel,
                      ShootThroughError, Topology, resolve_topology)
from .pwm import (DeadTimeProgram, DeadTimeSchedule, EdgeSchedule, GateVector,
                  PwmConfig, build_gate_schedule, dead_time_at,
                  quantize_to_clock, scheduled_dead_time, sps_carrier_offsets,
                  verify_gate_stream)
from .scenario import (ConfigError, D_CMD_RATED, RATED_POWER, Scenario,
                       ScenarioResult, SweepResult, parse_config, parse_value,
                       run_compare, run_scenario, run_sweep, serialize_config,
                       set_key)
from .softstart import (StartupStrategy, dead_time_for_conduction_ratio,
                        largest_starting_dead_time, strategy_fixed_large,
                        strategy_hard, strategy_variable_ramp)
from .solver import (NonFiniteStateError, SolverConfig, WaveformTrace,
                     locate_zero_crossing, simulate, step_interval)

__version__ = "0.1.0"

__all__ = [
    "AveragedState", "ConfigError", "ConverterState", "D_CMD_RATED",
    "DabParams", "DeadTimeProgram", "DeadTimeSchedule", "EdgeSchedule",
    "GateVector", "LegState", "LoadModel", "NonFiniteStateError", "PwmConfig",
    "RATED_POWER", "Scenario", "ScenarioResult", "ShootThroughError",
    "SolverConfig", "StartupMetrics", "StartupStrategy", "SweepResult",
    "Topology", "WaveformTrace", "averaged_cap_current", "averaged_dvdc_dt",
    "build_gate_schedule", "cap_energy", "compute_metrics", "dead_time_at",
    "dead_time_for_conduction_ratio", "effective_conduction",
    "energy_balance_residual", "integrate_averaged_model",
    "largest_starting_dead_time", "locate_zero_crossing", "parse_config",
    "parse_value", "phase_for_power", "power_sps", "quantize_to_clock",
    "resolve_topology", "run_compare", "run_scenario", "run_sweep",
    "scheduled_dead_time", "serialize_config", "set_key", "simulate",
    "sps_carrier_offsets", "step_interval", "strategy_fixed_large",
    "strategy_hard", "strategy_variable_ramp", "verify_gate_stream",
]
