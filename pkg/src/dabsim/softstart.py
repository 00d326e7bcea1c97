"""Startup strategies for the gate dead time.

Black start of the link capacitor is the hard part of a dual active bridge:
with the cap empty the secondary bridge is a short through its body diodes
and the leakage inductance is the only thing limiting inrush. The strategies
here differ only in how the gate dead time evolves:

* hard: nominal dead time from the first pulse. Maximum inrush, the
  baseline everything else is judged against.
* fixed_large: a large constant dead time (short conduction slivers) held
  for a while, then stepped to nominal. Limits average charge per cycle but
  steps the full drive in at the end.
* variable_ramp: start with the dead time just under the full half period,
  so only a sliver of volt-seconds reaches the transformer, then ramp it
  linearly down to nominal. The conduction window grows smoothly and the
  link walks up without an inrush spike.

All strategies produce the same gate pattern once the dead time reaches its
final value, so steady state is identical by construction.
"""

import math
from dataclasses import dataclass

from .pwm import (DeadTimeProgram, DeadTimeSchedule, PwmConfig, ScheduleLike,
                  quantize_to_clock)

STRATEGY_KINDS = ("hard", "fixed_large", "variable_ramp")


def dead_time_for_conduction_ratio(ratio: float, t_sw: float) -> float:
    """Total dead time per period giving the requested conduction ratio.

    ratio is the fraction of the period each switch actually conducts
    (0.5 max for a half bridge). A ratio of 0.15 on a 31.25 us period
    leaves 0.30 of each half period conducting.
    """
    if not 0 < ratio <= 0.5:
        raise ValueError(f"conduction ratio must be in (0, 0.5], got {ratio}")
    return (1.0 - 2.0 * ratio) * t_sw


def largest_starting_dead_time(pwm: PwmConfig) -> float:
    """Largest grid-representable total dead time below one switching period.

    The per-edge delay is the largest clock multiple strictly under the half
    period, so the first commanded pulses are at most slivers (and may even
    quantize away entirely when the half period lands on the grid).
    """
    half_ticks = pwm.t_sw * pwm.clk / 2.0
    # Largest integer strictly below, robust to float error in the product.
    delay_ticks = math.ceil(half_ticks - 16.0 * math.ulp(half_ticks)) - 1
    if delay_ticks < 1:
        raise ValueError("clock too slow to fit a dead time in a half period")
    return 2.0 * delay_ticks / pwm.clk


@dataclass(frozen=True)
class StartupStrategy:
    """Named dead-time policy plus the timing knobs it needs.

    t_enable    first gate pulse instant (s)
    t_d_final   nominal total dead time per period (s)
    t_ramp      variable_ramp: ramp duration (s)
    t_d_large   fixed_large: the large total dead time (s)
    hold        fixed_large: how long to hold it before stepping down (s)
    """

    kind: str = "variable_ramp"
    t_enable: float = 1.5
    t_d_final: float = 600e-9
    t_ramp: float = 150e-3
    t_d_large: float = 21.875e-6
    hold: float = 150e-3

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown startup strategy {self.kind!r}")
        if not self.t_d_final > 0:
            raise ValueError(f"t_d_final must be > 0, got {self.t_d_final}")
        if self.t_enable < 0:
            raise ValueError(f"t_enable must be >= 0, got {self.t_enable}")
        if self.kind == "variable_ramp" and self.t_ramp < 0:
            raise ValueError(f"t_ramp must be >= 0, got {self.t_ramp}")
        if self.kind == "fixed_large":
            if self.hold < 0:
                raise ValueError(f"hold must be >= 0, got {self.hold}")
            if self.t_d_large < self.t_d_final:
                raise ValueError("t_d_large smaller than the final dead time")

    def schedule(self, pwm: PwmConfig) -> ScheduleLike:
        """Concrete dead-time schedule for a given PWM configuration."""
        if self.kind == "hard":
            return DeadTimeSchedule(t_d_start=self.t_d_final,
                                    t_d_final=self.t_d_final,
                                    t_enable=self.t_enable, t_ramp=0.0)
        if self.kind == "fixed_large":
            large = DeadTimeSchedule(t_d_start=self.t_d_large,
                                     t_d_final=self.t_d_large,
                                     t_enable=self.t_enable, t_ramp=0.0)
            final = DeadTimeSchedule(t_d_start=self.t_d_final,
                                     t_d_final=self.t_d_final,
                                     t_enable=self.t_enable + self.hold,
                                     t_ramp=0.0)
            return DeadTimeProgram(t_on=self.t_enable,
                                   segments=(large, final))
        start = largest_starting_dead_time(pwm)
        if start < self.t_d_final:
            raise ValueError("final dead time does not fit in a half period")
        return DeadTimeSchedule(t_d_start=start, t_d_final=self.t_d_final,
                                t_enable=self.t_enable, t_ramp=self.t_ramp)


def strategy_hard(t_enable: float = 1.5,
                  t_d_final: float = 600e-9) -> StartupStrategy:
    """Nominal dead time from the first pulse."""
    return StartupStrategy(kind="hard", t_enable=t_enable, t_d_final=t_d_final)


def strategy_fixed_large(t_enable: float = 1.5, t_d_final: float = 600e-9,
                         t_d_large: float = 21.875e-6,
                         hold: float = 150e-3) -> StartupStrategy:
    """Large constant dead time for `hold` seconds, then nominal."""
    return StartupStrategy(kind="fixed_large", t_enable=t_enable,
                           t_d_final=t_d_final, t_d_large=t_d_large, hold=hold)


def strategy_variable_ramp(t_enable: float = 1.5, t_d_final: float = 600e-9,
                           t_ramp: float = 150e-3) -> StartupStrategy:
    """Dead time ramped linearly from a near-full half period to nominal."""
    return StartupStrategy(kind="variable_ramp", t_enable=t_enable,
                           t_d_final=t_d_final, t_ramp=t_ramp)


def initial_sliver_width(pwm: PwmConfig, strategy: StartupStrategy) -> float:
    """On-time of the first commanded pulse after quantization (s).

    For the variable ramp this is at most one clock tick and can be zero
    when the half period itself sits on the clock grid.
    """
    sched = strategy.schedule(pwm)
    if isinstance(sched, DeadTimeProgram):
        td = sched.total_dead_time(strategy.t_enable)
    else:
        td = sched.t_d_start
    half = pwm.t_sw / 2.0
    on = quantize_to_clock(td / 2.0, pwm.clk)
    off = quantize_to_clock(half, pwm.clk)
    return max(0.0, off - on)
