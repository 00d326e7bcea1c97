"""Gate generation: clock quantization, dead-band trajectory, stream checks.

Frozen reference values use the rated design: 32 kHz carriers on a 100 MHz
timer clock, so one period is 3125 ticks and one half period is 1562.5
ticks (off the grid, which is what makes the tie rounding observable).
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dabsim import (DeadTimeSchedule, PwmConfig, build_gate_schedule,
                    dead_time_at, quantize_to_clock, scheduled_dead_time,
                    sps_carrier_offsets, verify_gate_stream)
from dabsim.pwm import leg_edge_stream, per_edge_delay
from dabsim.softstart import strategy_hard, strategy_variable_ramp

CLK = 100e6
T_SW = 31.25e-6


def ramp_iv_a(t_enable=1.5, t_ramp=150e-3):
    """The published startup trajectory on the 100 MHz grid."""
    return DeadTimeSchedule(t_d_start=31.24e-6, t_d_final=600e-9,
                            t_enable=t_enable, t_ramp=t_ramp)


def on_times(schedule, gate):
    """Per-pulse on durations (s) of one gate, paired rise to fall."""
    sel = schedule.gate == gate
    ticks = schedule.ticks[sel]
    rising = schedule.rising[sel]
    order = np.argsort(ticks, kind="stable")
    ticks, rising = ticks[order], rising[order]
    rises = ticks[rising]
    falls = ticks[~rising]
    m = min(len(rises), len(falls))
    return (falls[:m] - rises[:m]) / schedule.clk


def test_quantize_examples():
    assert quantize_to_clock(15.62e-6, CLK) == 1562 / CLK
    # 30.5 ticks is a mathematical tie; ties round up.
    assert quantize_to_clock(305e-9, CLK) == 31 / CLK
    assert quantize_to_clock(0.0, CLK) == 0.0


def test_quantize_rejects_bad_args():
    with pytest.raises(ValueError):
        quantize_to_clock(-1e-9, CLK)
    with pytest.raises(ValueError):
        quantize_to_clock(1e-6, 0.0)


def test_per_edge_delay_splits_total():
    assert per_edge_delay(31.24e-6) == pytest.approx(15.62e-6, rel=1e-15)
    assert per_edge_delay(600e-9) == pytest.approx(300e-9, rel=1e-15)
    assert per_edge_delay(0.0) == 0.0
    with pytest.raises(ValueError):
        per_edge_delay(-1e-9)


def test_dead_time_trajectory_anchor_points():
    sched = ramp_iv_a()
    assert dead_time_at(sched, 1.4) == 31.24e-6
    # Midpoint of the ramp: arithmetic mean of the endpoints.
    mid = dead_time_at(sched, 1.5 + 75e-3)
    assert mid == pytest.approx(0.5 * (31.24e-6 + 600e-9), rel=1e-12)
    assert dead_time_at(sched, 2.0) == 600e-9
    # The post-ramp branch wins exactly at the ramp end.
    assert dead_time_at(sched, 1.5 + 150e-3) == 600e-9


def test_zero_length_ramp_reads_final_from_enable():
    step = DeadTimeSchedule(31.24e-6, 600e-9, t_enable=1.5, t_ramp=0.0)
    assert dead_time_at(step, 1.5) == 600e-9
    assert dead_time_at(step, np.nextafter(1.5, 0.0)) == 31.24e-6


@given(st.floats(0.0, 150e-3), st.floats(0.0, 150e-3))
def test_dead_time_never_increases(dt1, dt2):
    sched = ramp_iv_a()
    t1, t2 = sorted((1.5 + dt1, 1.5 + dt2))
    assert dead_time_at(sched, t2) <= dead_time_at(sched, t1)


def test_scheduled_dead_time_matches_scalar():
    sched = ramp_iv_a()
    times = np.array([0.0, 1.5, 1.55, 1.65, 2.0])
    vec = scheduled_dead_time(sched, times)
    assert vec == pytest.approx([dead_time_at(sched, t) for t in times])


def test_leg_stream_nominal_on_time(pwm):
    # 300 ns per-edge delay carves 300 ns out of each 15.625 us half pulse.
    # On a 5 ns tick both instants are grid-exact, so the on-time is too.
    fine = PwmConfig(clk=200e6)
    sched = strategy_hard(t_enable=0.0, t_d_final=600e-9).schedule(fine)
    leg = leg_edge_stream(fine, sched, 0.0, horizon=20 * T_SW)
    widths = on_times(leg, 1)
    assert len(widths) >= 19
    assert widths == pytest.approx(15.325e-6, abs=1e-15)
    # The 100 MHz grid puts the half period on a tie; the pulse may gain
    # or lose up to half a tick but no more.
    leg = leg_edge_stream(pwm, sched, 0.0, horizon=20 * T_SW)
    assert np.abs(on_times(leg, 1) - 15.325e-6).max() <= 0.5 / pwm.clk + 1e-15


def test_leg_stream_sliver_pulse(pwm):
    # Largest grid delay leaves a 5 ns commanded pulse. A 5 ns tick carries
    # it exactly on both gates of the leg.
    fine = PwmConfig(clk=200e6)
    sched = DeadTimeSchedule(31.24e-6, 31.24e-6, t_enable=0.0, t_ramp=0.0)
    leg = leg_edge_stream(fine, sched, 0.0, horizon=20 * T_SW)
    assert leg.degenerate_pulses == 0
    assert on_times(leg, 1) == pytest.approx(5e-9, abs=1e-15)
    assert on_times(leg, 2) == pytest.approx(5e-9, abs=1e-15)
    # The 10 ns tick resolves the same command both ways at once: the high
    # pulse straddles the half-period tie and is stretched to one tick, the
    # low pulse rounds onto its own turn-off and is dropped.
    leg = leg_edge_stream(pwm, sched, 0.0, horizon=20 * T_SW)
    assert on_times(leg, 1) == pytest.approx(10e-9, abs=1e-15)
    assert len(on_times(leg, 2)) == 0
    assert leg.degenerate_pulses > 0


def test_leg_stream_drops_and_counts_degenerate_pulses():
    # On a 128 MHz grid the half period is exactly 2000 ticks, so an early
    # ramp delay of 1999.5+ ticks rounds onto the turn-off edge and the
    # pulse vanishes instead of being emitted with zero width.
    pwm = PwmConfig(clk=128e6)
    sched = DeadTimeSchedule(t_d_start=31.2422e-6, t_d_final=600e-9,
                             t_enable=0.0, t_ramp=10e-3)
    leg = leg_edge_stream(pwm, sched, 0.0, horizon=50 * T_SW)
    assert leg.degenerate_pulses > 0
    rises = leg.rising.sum()
    falls = (~leg.rising).sum()
    assert rises == falls


def test_tiny_dead_time_is_complementary_within_one_tick():
    # One tick per edge on a grid where the half period is integral: equal
    # on-times and exactly one tick of gap at every handover.
    pwm = PwmConfig(clk=128e6)
    tick = 1.0 / pwm.clk
    sched = strategy_hard(t_enable=0.0, t_d_final=2 * tick).schedule(pwm)
    leg = leg_edge_stream(pwm, sched, 0.0, horizon=10 * T_SW)
    hi = on_times(leg, 1)
    lo = on_times(leg, 2)
    assert hi == pytest.approx(0.5 * T_SW - tick, abs=1e-15)
    assert lo == pytest.approx(0.5 * T_SW - tick, abs=1e-15)
    report = verify_gate_stream(leg, pwm, sched)
    assert report.shoot_through_instants == 0
    assert report.max_gap_error_ticks <= 1


def test_carrier_offsets_wrap():
    offs = sps_carrier_offsets(PwmConfig(phase_ratio=0.25))
    assert offs == pytest.approx(
        (0.0, 0.5 * T_SW, 0.125 * T_SW, 0.625 * T_SW))
    # A negative command wraps the secondary carriers into [0, T).
    offs = sps_carrier_offsets(PwmConfig(phase_ratio=-0.25))
    assert offs[2] == pytest.approx(0.875 * T_SW)


def test_phase_displacement_exact_on_grid():
    # D = 0.25 displaces the secondary by T/8 = 3.90625 us, which is 500
    # ticks at 128 MHz. Identical delays cancel, so rise minus rise is the
    # displacement exactly.
    pwm = PwmConfig(clk=128e6, phase_ratio=0.25)
    sched = strategy_hard(t_enable=0.0, t_d_final=600e-9).schedule(pwm)
    edges = build_gate_schedule(pwm, sched, horizon=10 * T_SW)
    r1 = edges.ticks[(edges.gate == 1) & edges.rising]
    r5 = edges.ticks[(edges.gate == 5) & edges.rising]
    m = min(len(r1), len(r5))
    assert np.all(r5[:m] - r1[:m] == 500)
    assert 500 / pwm.clk == pytest.approx(3.90625e-6, rel=1e-15)


def test_phase_displacement_within_half_tick_off_grid(pwm):
    # Same displacement on the 100 MHz grid lands between ticks; each edge
    # may round differently but never strays more than half a tick.
    pwm = PwmConfig(phase_ratio=0.25)
    sched = strategy_hard(t_enable=0.0, t_d_final=600e-9).schedule(pwm)
    edges = build_gate_schedule(pwm, sched, horizon=10 * T_SW)
    r1 = edges.ticks[(edges.gate == 1) & edges.rising]
    r5 = edges.ticks[(edges.gate == 5) & edges.rising]
    m = min(len(r1), len(r5))
    lag = (r5[:m] - r1[:m]) / pwm.clk
    assert np.all(np.abs(lag - 3.90625e-6) <= 0.5 / pwm.clk + 1e-15)


def test_constant_delay_stream_is_periodic(pwm):
    sched = strategy_hard(t_enable=0.0, t_d_final=600e-9).schedule(pwm)
    edges = build_gate_schedule(pwm, sched, horizon=30 * T_SW)
    period_ticks = round(T_SW * CLK)
    for gate in range(1, 9):
        for rising in (True, False):
            sel = np.sort(edges.ticks[(edges.gate == gate)
                                      & (edges.rising == rising)])
            assert np.all(np.diff(sel) == period_ticks)


def test_zero_ramp_equals_hard_start(pwm):
    ramp0 = strategy_variable_ramp(t_enable=1e-3, t_d_final=600e-9,
                                   t_ramp=0.0).schedule(pwm)
    hard = strategy_hard(t_enable=1e-3, t_d_final=600e-9).schedule(pwm)
    a = build_gate_schedule(pwm, ramp0, horizon=1e-3 + 20 * T_SW)
    b = build_gate_schedule(pwm, hard, horizon=1e-3 + 20 * T_SW)
    assert np.array_equal(a.ticks, b.ticks)
    assert np.array_equal(a.gate, b.gate)
    assert np.array_equal(a.rising, b.rising)


def test_ramp_stream_honours_dead_band_contract():
    # Compressed version of the published trajectory: the full-length scan
    # lives in the acceptance suite.
    pwm = PwmConfig(phase_ratio=0.1)
    sched = ramp_iv_a(t_enable=1e-3, t_ramp=20e-3)
    edges = build_gate_schedule(pwm, sched, horizon=23e-3)
    report = verify_gate_stream(edges, pwm, sched)
    assert report.n_events > 0
    assert report.shoot_through_instants == 0
    assert report.max_gap_error_ticks <= 1
    assert report.n_gaps_checked > 5000


def test_ramp_reaches_final_delay_on_schedule(pwm):
    # The first period boundary at or past the ramp end must already be
    # running the final delay; measured gaps inherit the one tick bound.
    sched = ramp_iv_a(t_enable=1e-3, t_ramp=20e-3)
    t_done = sched.t_enable + sched.t_ramp
    edges = build_gate_schedule(pwm, sched, horizon=t_done + 5 * T_SW)
    r1 = edges.ticks[(edges.gate == 1) & edges.rising] / CLK
    f2 = edges.ticks[(edges.gate == 2) & ~edges.rising] / CLK
    late_rises = r1[r1 >= t_done + T_SW]
    assert len(late_rises) >= 2
    for t_rise in late_rises[:3]:
        prior_fall = f2[f2 <= t_rise].max()
        gap = t_rise - prior_fall
        assert abs(gap - per_edge_delay(600e-9)) <= 1.0 / CLK + 1e-15


@settings(max_examples=40, deadline=None)
@given(
    td=st.floats(20e-9, 31.24e-6),
    d=st.floats(-0.5, 0.5),
)
def test_stream_contract_holds_for_random_commands(td, d):
    pwm = PwmConfig(phase_ratio=d)
    td = quantize_to_clock(td, CLK / 2.0)  # even tick count splits cleanly
    if td < 2.0 / CLK:
        td = 2.0 / CLK
    sched = strategy_hard(t_enable=0.0, t_d_final=td).schedule(pwm)
    edges = build_gate_schedule(pwm, sched, horizon=12 * T_SW)
    report = verify_gate_stream(edges, pwm, sched)
    assert report.shoot_through_instants == 0
    assert report.max_gap_error_ticks <= 1


def test_edge_csv_columns(tmp_path, pwm):
    sched = strategy_hard(t_enable=0.0, t_d_final=600e-9).schedule(pwm)
    edges = build_gate_schedule(pwm, sched, horizon=2 * T_SW)
    path = tmp_path / "edges.csv"
    edges.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_seconds,gate_index,direction"
    assert all(line.split(",")[2] in ("rising", "falling")
               for line in lines[1:])
