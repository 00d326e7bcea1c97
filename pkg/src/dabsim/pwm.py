"""Gate signal generation for a dual active bridge under single phase shift.

Emulates an up-down-counter PWM peripheral: each half bridge leg runs a
50 percent carrier, complementary gates are separated by a programmable
dead band, and every edge is quantized to the controller clock grid.
Dead time is applied with the delayed-turn-on convention (turn-offs stay
on the ideal square-wave edges, turn-ons are pushed back by the per-edge
delay), and the dead-band register is latched once per switching period
at the period boundary, which is how the hardware timers behave.

Edge streams are produced as numpy arrays of integer clock ticks so a
multi-second run stays exact; conversion to seconds happens only at the
consumer boundary.
"""

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence, Union

import numpy as np

# Gate numbering: primary leg A = (1, 2), primary leg B = (3, 4),
# secondary leg A = (5, 6), secondary leg B = (7, 8). Odd = high side.
PRIMARY_LEG_A = (1, 2)
PRIMARY_LEG_B = (3, 4)
SECONDARY_LEG_A = (5, 6)
SECONDARY_LEG_B = (7, 8)
LEG_PAIRS = (PRIMARY_LEG_A, PRIMARY_LEG_B, SECONDARY_LEG_A, SECONDARY_LEG_B)


class GateVector(NamedTuple):
    """Commanded on/off state of the eight switches, m1 through m8."""

    m1: bool = False
    m2: bool = False
    m3: bool = False
    m4: bool = False
    m5: bool = False
    m6: bool = False
    m7: bool = False
    m8: bool = False

    @classmethod
    def all_off(cls) -> "GateVector":
        return cls()


@dataclass(frozen=True)
class EdgeEvent:
    """A single gate transition."""

    t: float      # s
    gate: int     # 1..8
    rising: bool


@dataclass(frozen=True)
class PwmConfig:
    """Modulator settings shared by all four legs.

    phase_ratio is the single-phase-shift command D, the displacement of
    the secondary bridge as a fraction of the half period; positive D
    transfers power from the primary side to the secondary side.
    """

    f_sw: float = 32e3          # switching frequency (Hz)
    clk: float = 100e6          # timer clock used for edge quantization (Hz)
    phase_ratio: float = 0.0    # D, dimensionless, |D| <= 0.5
    horizon: float = 2.0        # simulation end time (s)

    def __post_init__(self) -> None:
        if not self.f_sw > 0:
            raise ValueError(f"f_sw must be > 0, got {self.f_sw}")
        if self.clk < 100.0 * self.f_sw:
            raise ValueError(
                f"clk must be at least 100x f_sw for a usable grid "
                f"(clk={self.clk}, f_sw={self.f_sw})")
        if abs(self.phase_ratio) > 0.5:
            raise ValueError(f"|phase_ratio| must be <= 0.5, got {self.phase_ratio}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")

    @property
    def t_sw(self) -> float:
        """Switching period (s)."""
        return 1.0 / self.f_sw


@dataclass(frozen=True)
class DeadTimeSchedule:
    """Piecewise-linear trajectory of the total dead time per period.

    Holds t_d_start before t_enable, ramps linearly to t_d_final over
    t_ramp, then holds t_d_final. All dead times are totals per switching
    period; the per-edge delay programmed into the timer is half of the
    total, split equally between the two transitions.
    """

    t_d_start: float   # total initial dead time per period (s)
    t_d_final: float   # total final dead time per period (s)
    t_enable: float    # instant the outputs are released and the ramp starts (s)
    t_ramp: float      # ramp duration (s); 0 degenerates to a step

    def __post_init__(self) -> None:
        if not 0 < self.t_d_final <= self.t_d_start:
            raise ValueError(
                f"need 0 < t_d_final <= t_d_start, got "
                f"{self.t_d_final} and {self.t_d_start}")
        if self.t_enable < 0:
            raise ValueError(f"t_enable must be >= 0, got {self.t_enable}")
        if self.t_ramp < 0:
            raise ValueError(f"t_ramp must be >= 0, got {self.t_ramp}")

    def validate_against(self, pwm: PwmConfig) -> None:
        if self.t_d_start >= pwm.t_sw:
            raise ValueError(
                f"t_d_start {self.t_d_start} must stay below one switching "
                f"period {pwm.t_sw}")


@dataclass(frozen=True)
class DeadTimeProgram:
    """Output-enable instant plus one or more dead-time schedule segments.

    A single segment covers the ramped and hard strategies. A hold-then-step
    trajectory needs the outputs released before the step segment anchors,
    which is why the enable instant lives here and not in the segment.
    """

    t_on: float                                # outputs released at this time (s)
    segments: tuple[DeadTimeSchedule, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("program needs at least one schedule segment")
        anchors = [s.t_enable for s in self.segments]
        if anchors != sorted(anchors):
            raise ValueError("schedule segments must be ordered by t_enable")
        if self.t_on > self.segments[0].t_enable:
            raise ValueError("outputs cannot enable after the first segment anchor")

    def total_dead_time(self, t: float) -> float:
        """Total dead time per period scheduled at time t (s)."""
        seg = self.segments[0]
        for cand in self.segments[1:]:
            if t >= cand.t_enable:
                seg = cand
        return dead_time_at(seg, t)

    def validate_against(self, pwm: PwmConfig) -> None:
        for seg in self.segments:
            seg.validate_against(pwm)


ScheduleLike = Union[DeadTimeSchedule, DeadTimeProgram]


def as_program(sched: ScheduleLike) -> DeadTimeProgram:
    """Wrap a bare schedule; its enable instant doubles as the output enable."""
    if isinstance(sched, DeadTimeProgram):
        return sched
    return DeadTimeProgram(t_on=sched.t_enable, segments=(sched,))


def dead_time_at(sched: DeadTimeSchedule, t: float) -> float:
    """Scheduled total dead time (s) at time t.

    The post-ramp branch wins at the boundary so a zero-length ramp reads
    t_d_final from t_enable onward, making it equivalent to a hard start.
    """
    if t >= sched.t_enable + sched.t_ramp:
        return sched.t_d_final
    if t <= sched.t_enable:
        return sched.t_d_start
    frac = (t - sched.t_enable) / sched.t_ramp
    return sched.t_d_start + (sched.t_d_final - sched.t_d_start) * frac


def per_edge_delay(t_d_total: float) -> float:
    """Per-edge turn-on delay: the total dead window split over two edges."""
    if t_d_total < 0:
        raise ValueError(f"dead time must be >= 0, got {t_d_total}")
    return 0.5 * t_d_total


def _tick_of(x: float) -> int:
    # Round to nearest tick with ties up. The tolerance absorbs float error
    # in products like k*period_ticks so a mathematical half-tick boundary
    # still lands on the later edge.
    tol = 16.0 * math.ulp(max(1.0, abs(x)))
    return int(math.floor(x + 0.5 + tol))


def _ticks_of(x: np.ndarray) -> np.ndarray:
    tol = 16.0 * np.spacing(np.maximum(1.0, np.abs(x)))
    return np.floor(x + 0.5 + tol).astype(np.int64)


def quantize_to_clock(t: float, clk: float) -> float:
    """Snap an instant to the nearest clock-grid multiple; ties round up."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not clk > 0:
        raise ValueError(f"clk must be > 0, got {clk}")
    return _tick_of(t * clk) / clk


@dataclass
class EdgeSchedule:
    """Sorted gate transitions on the clock grid.

    Simultaneous edges are ordered falling before rising, so replaying the
    stream never passes through a state where a leg's two gates are both on.
    """

    clk: float            # Hz
    ticks: np.ndarray     # int64 edge instants in clock ticks
    gate: np.ndarray      # int8, 1..8
    rising: np.ndarray    # bool
    degenerate_pulses: int = 0

    def __len__(self) -> int:
        return int(self.ticks.shape[0])

    def times(self) -> np.ndarray:
        """Edge instants in seconds."""
        return self.ticks / self.clk

    def events(self) -> Iterator[EdgeEvent]:
        for k in range(len(self)):
            yield EdgeEvent(t=self.ticks[k] / self.clk,
                            gate=int(self.gate[k]),
                            rising=bool(self.rising[k]))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t_seconds,gate_index,direction\n")
            for k in range(len(self)):
                d = "rising" if self.rising[k] else "falling"
                fh.write(f"{self.ticks[k] / self.clk!r},{self.gate[k]},{d}\n")


def _merge(parts: Sequence[EdgeSchedule], clk: float) -> EdgeSchedule:
    if not parts:
        empty = np.empty(0, dtype=np.int64)
        return EdgeSchedule(clk, empty, empty.astype(np.int8), empty.astype(bool))
    ticks = np.concatenate([p.ticks for p in parts])
    gate = np.concatenate([p.gate for p in parts])
    rising = np.concatenate([p.rising for p in parts])
    # Primary key time, then falling before rising, then gate index for a
    # stable deterministic order.
    order = np.lexsort((gate, rising, ticks))
    return EdgeSchedule(clk, ticks[order], gate[order], rising[order],
                        degenerate_pulses=sum(p.degenerate_pulses for p in parts))


def _segment_dead_time(seg: DeadTimeSchedule, t: np.ndarray) -> np.ndarray:
    ramp = seg.t_ramp if seg.t_ramp > 0 else 1.0
    lin = seg.t_d_start + (seg.t_d_final - seg.t_d_start) * (t - seg.t_enable) / ramp
    out = np.where(t <= seg.t_enable, seg.t_d_start, lin)
    return np.where(t >= seg.t_enable + seg.t_ramp, seg.t_d_final, out)


def _program_dead_time(prog: DeadTimeProgram, t: np.ndarray) -> np.ndarray:
    out = _segment_dead_time(prog.segments[0], t)
    for seg in prog.segments[1:]:
        mask = t >= seg.t_enable
        if mask.any():
            out[mask] = _segment_dead_time(seg, t[mask])
    return out


def scheduled_dead_time(sched: ScheduleLike, times: np.ndarray) -> np.ndarray:
    """Total dead time per period (s) scheduled at each instant in times."""
    return _program_dead_time(as_program(sched), np.asarray(times, dtype=float))


def leg_edge_stream(pwm: PwmConfig, sched: ScheduleLike, carrier_offset: float,
                    horizon: float, gates: tuple[int, int] = (1, 2)) -> EdgeSchedule:
    """Edge stream for one leg: high gate plus complementary low gate.

    The leg's carrier starts at the output-enable instant plus the carrier
    offset and repeats every switching period. Within a period starting at
    s with per-edge delay d: high gate on over [s+d, s+T/2), low gate on
    over [s+T/2+d, s+T). The delay is sampled once at s and held, and each
    edge is quantized to the clock grid after the delay is applied.

    Pulses whose quantized turn-on does not precede their turn-off are
    dropped and counted in ``degenerate_pulses``; that is a reporting
    condition, not an error, since a near-period dead time legitimately
    squeezes the on-time below one clock tick.
    """
    prog = as_program(sched)
    prog.validate_against(pwm)
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    hi, lo = gates

    clk = pwm.clk
    pticks = clk / pwm.f_sw          # period in ticks, float
    half = 0.5 * pticks
    base = prog.t_on * clk + carrier_offset * clk
    if base >= horizon * clk:
        empty = np.empty(0, dtype=np.int64)
        return EdgeSchedule(clk, empty, empty.astype(np.int8), empty.astype(bool))

    n_per = int(math.ceil((horizon * clk - base) / pticks)) + 1
    k = np.arange(n_per, dtype=np.float64)
    start_f = base + k * pticks

    td = _program_dead_time(prog, start_f / clk)    # total dead time per period (s)
    delta_f = 0.5 * td * clk                        # per-edge delay in ticks, float

    hi_on = _ticks_of(start_f + delta_f)
    hi_off = _ticks_of(start_f + half)
    lo_on = _ticks_of(start_f + half + delta_f)
    lo_off = _ticks_of(start_f + pticks)

    horizon_tick = _tick_of(horizon * clk)

    def pack(on, off, gate_idx):
        ok = on < off
        n_degen = int(np.count_nonzero(~ok))
        on, off = on[ok], off[ok]
        ticks = np.concatenate([on[on <= horizon_tick], off[off <= horizon_tick]])
        rising = np.zeros(ticks.shape[0], dtype=bool)
        rising[: np.count_nonzero(on <= horizon_tick)] = True
        gate = np.full(ticks.shape[0], gate_idx, dtype=np.int8)
        return ticks, gate, rising, n_degen

    t1, g1, r1, d1 = pack(hi_on, hi_off, hi)
    t2, g2, r2, d2 = pack(lo_on, lo_off, lo)
    part = EdgeSchedule(clk, np.concatenate([t1, t2]), np.concatenate([g1, g2]),
                        np.concatenate([r1, r2]), degenerate_pulses=d1 + d2)
    return _merge([part], clk)


def sps_carrier_offsets(pwm: PwmConfig) -> tuple[float, float, float, float]:
    """Carrier offsets (s) for legs 1-4 under single phase shift.

    Primary leg B runs a half period behind leg A so the diagonal pairs
    switch together; the secondary carriers repeat that pattern displaced
    by D*T/2. Offsets are wrapped into [0, T).
    """
    t_sw = pwm.t_sw
    shift = pwm.phase_ratio * 0.5 * t_sw

    def wrap(x: float) -> float:
        return x % t_sw

    return (0.0, wrap(0.5 * t_sw), wrap(shift), wrap(shift + 0.5 * t_sw))


def build_gate_schedule(pwm: PwmConfig, sched: ScheduleLike,
                        horizon: float) -> EdgeSchedule:
    """Merged eight-gate edge stream for the full converter.

    All four legs share the same dead-time trajectory. Events are sorted by
    time with falling edges ahead of rising edges at equal timestamps.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    offs = sps_carrier_offsets(pwm)
    legs = [leg_edge_stream(pwm, sched, off, horizon, gates=pair)
            for off, pair in zip(offs, LEG_PAIRS)]
    return _merge(legs, pwm.clk)


@dataclass
class GateStreamReport:
    """Result of an exhaustive scan over a merged edge stream."""

    n_events: int
    shoot_through_instants: int      # timestamps where any leg had both gates on
    n_gaps_checked: int
    max_gap_error_ticks: int         # worst |measured - scheduled| dead gap


def verify_gate_stream(schedule: EdgeSchedule, pwm: PwmConfig,
                       sched: ScheduleLike) -> GateStreamReport:
    """Replay an edge stream and check the dead-band contract.

    Walks every event in order, tracking all eight gate states. After each
    batch of simultaneous events the four legs must be exclusive. Every
    observed off-window between complementary edges of one leg is compared
    against the delay scheduled at that period's boundary; the two must
    agree within one clock tick.
    """
    prog = as_program(sched)
    state = [False] * 8
    shoot = 0
    gaps = 0
    worst = 0

    # last falling tick and which gate fell, per leg
    last_fall = [None] * 4
    leg_of = {}
    for li, (hi, lo) in enumerate(LEG_PAIRS):
        leg_of[hi] = (li, True)
        leg_of[lo] = (li, False)

    ticks = schedule.ticks
    gate = schedule.gate
    rising = schedule.rising
    n = len(schedule)
    i = 0
    while i < n:
        t0 = ticks[i]
        j = i
        while j < n and ticks[j] == t0:
            g = int(gate[j])
            li, is_hi = leg_of[g]
            if rising[j]:
                state[g - 1] = True
                if last_fall[li] is not None:
                    fall_tick, fell_hi = last_fall[li]
                    if fell_hi != is_hi:
                        measured = int(t0 - fall_tick)
                        # The delay was latched at the period boundary. For
                        # the gap ahead of a high-gate turn-on that boundary
                        # is the fall itself; for a low-gate turn-on it is
                        # half a period before the fall.
                        if is_hi:
                            boundary = fall_tick / pwm.clk
                        else:
                            boundary = (fall_tick - 0.5 * pwm.clk / pwm.f_sw) / pwm.clk
                        d_sched = per_edge_delay(prog.total_dead_time(boundary))
                        expect = _tick_of(d_sched * pwm.clk)
                        worst = max(worst, abs(measured - expect))
                        gaps += 1
            else:
                state[g - 1] = False
                last_fall[li] = (t0, is_hi)
            j += 1
        for hi, lo in LEG_PAIRS:
            if state[hi - 1] and state[lo - 1]:
                shoot += 1
                break
        i = j
    return GateStreamReport(n_events=n, shoot_through_instants=shoot,
                            n_gaps_checked=gaps, max_gap_error_ticks=worst)
