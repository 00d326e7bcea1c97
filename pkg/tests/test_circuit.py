"""Leg and bridge conduction resolution, including the zero-current cases."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dabsim import (ConverterState, DabParams, GateVector, LegState,
                    LoadModel, ShootThroughError, resolve_topology)
from dabsim.circuit import (derivatives, primary_bridge_voltage,
                            rectified_current, resolve_leg, secondary_network,
                            source_current, trace_voltages)


def gv(*on):
    """GateVector with the listed switch numbers on."""
    return GateVector(*[k + 1 in on for k in range(8)])


# --- single leg ---------------------------------------------------------

def test_leg_commanded_states_ignore_current():
    st_, v = resolve_leg(True, False, -10.0, 650.0)
    assert st_ is LegState.HIGH and v == 650.0
    st_, v = resolve_leg(False, True, -10.0, 650.0)
    assert st_ is LegState.LOW and v == 0.0


def test_leg_dead_time_diodes_steer_by_current_sign():
    st_, v = resolve_leg(False, False, 5.0, 650.0)
    assert st_ is LegState.DIODE_LOW and v == 0.0
    st_, v = resolve_leg(False, False, -5.0, 650.0)
    assert st_ is LegState.DIODE_HIGH and v == 650.0


def test_leg_blocks_at_zero_current():
    st_, v = resolve_leg(False, False, 0.0, 650.0)
    assert st_ is LegState.BLOCKED and v is None


def test_leg_shoot_through_raises():
    with pytest.raises(ShootThroughError):
        resolve_leg(True, True, 0.0, 650.0)


@given(i=st.floats(-100.0, 100.0), v_rail=st.floats(0.0, 1000.0))
def test_leg_diodes_never_source_power(i, v_rail):
    # With both gates off the midpoint voltage the diodes pick can only
    # absorb power from the external circuit, never inject it.
    st_, v = resolve_leg(False, False, i, v_rail)
    if v is None:
        return
    p_injected = (v - 0.5 * v_rail) * i  # relative to the rail midpoint
    assert p_injected <= 0.0


# --- full bridges -------------------------------------------------------

def test_primary_diagonal_drive():
    assert primary_bridge_voltage(gv(1, 4), 3.0, 650.0) == 650.0
    assert primary_bridge_voltage(gv(2, 3), 3.0, 650.0) == -650.0


def test_primary_freewheel_opposes_current():
    # All gates off: positive current freewheels through D2/D3 and sees
    # the full rail reversed across the terminals.
    assert primary_bridge_voltage(gv(), 10.0, 650.0) == -650.0
    assert primary_bridge_voltage(gv(), -10.0, 650.0) == 650.0


def test_primary_floats_at_zero_current():
    assert primary_bridge_voltage(gv(), 0.0, 650.0) is None


def test_secondary_commanded_diagonal():
    v_ref, i_rect = secondary_network(gv(5, 8), 20.0, 650.0, 1.0)
    assert v_ref == 650.0 and i_rect == 20.0


def test_secondary_rectifies_when_dead():
    # Diode diagonal feeds the link, whichever way the current flows.
    v_ref, i_rect = secondary_network(gv(), 20.0, 400.0, 1.0)
    assert v_ref == 400.0 and i_rect == 20.0
    v_ref, i_rect = secondary_network(gv(), -20.0, 400.0, 1.0)
    assert v_ref == -400.0 and i_rect == 20.0


def test_secondary_blocks_at_zero_current():
    v_ref, i_rect = secondary_network(gv(), 0.0, 650.0, 1.0)
    assert v_ref is None and i_rect == 0.0


@given(i=st.floats(-200.0, 200.0).filter(lambda x: x != 0.0),
       v_dc=st.floats(0.0, 1200.0),
       n=st.floats(0.25, 4.0))
def test_dead_secondary_always_charges_the_link(i, v_dc, n):
    v_ref, i_rect = secondary_network(gv(), i, v_dc, n)
    assert i_rect == pytest.approx(abs(i) / n)
    # Power flows into the link: reflected voltage carries the current sign.
    assert v_ref * i >= 0.0


# --- topology resolution ------------------------------------------------

def test_topology_conducting_factors(ref_design):
    topo = resolve_topology(gv(1, 4, 5, 8), 12.0, 650.0, ref_design)
    assert topo.conducting and topo.p_factor == 1 and topo.s_factor == 1
    assert rectified_current(topo, 12.0, ref_design.n) == 12.0
    assert source_current(topo, 12.0) == 12.0


def test_topology_blocks_on_strict_boundary(ref_design):
    # Primary freewheel voltage equals the link voltage exactly: no
    # direction strictly wins, the converter stays blocked.
    topo = resolve_topology(gv(1, 4), 0.0, 650.0, ref_design)
    assert not topo.conducting
    # A hair below the boundary the drive wins and current escapes.
    topo = resolve_topology(gv(1, 4), 0.0, 650.0 - 1e-6, ref_design)
    assert topo.conducting and topo.p_factor == 1


def test_topology_all_off_zero_current_blocked(ref_design):
    topo = resolve_topology(gv(), 0.0, 0.0, ref_design)
    assert not topo.conducting
    assert topo.floating_primary and topo.floating_secondary
    vp, vs = trace_voltages(topo, ref_design.v_bat, 0.0, ref_design.n)
    assert vp == 0.0 and vs == 0.0


def test_topology_escape_asymmetry(ref_design):
    # Secondary commanded +, primary dead. Below the battery voltage the
    # reflected drive cannot forward-bias the primary diodes in either
    # direction; above it, exactly one direction escapes.
    topo = resolve_topology(gv(5, 8), 0.0, 400.0, ref_design)
    assert not topo.conducting
    topo = resolve_topology(gv(5, 8), 0.0, 800.0, ref_design)
    assert topo.conducting
    assert topo.s_factor == 1 and topo.p_factor == 1


def test_floating_secondary_reflects_primary_drive(ref_design):
    topo = resolve_topology(gv(1, 4), 0.0, 800.0, ref_design)
    assert not topo.conducting
    vp, vs = trace_voltages(topo, ref_design.v_bat, 800.0, ref_design.n)
    assert vp == 650.0 and vs == 650.0 * ref_design.n


# --- derivatives --------------------------------------------------------

def test_derivative_full_drive(ref_design):
    state = ConverterState(0.0, 0.0, 0.0)
    di, dv = derivatives(state, 650.0, (0.0, 0.0), ref_design)
    assert di == pytest.approx(650.0 / 22e-6)          # 29.545 A/us
    assert di * 1e-6 == pytest.approx(29.545, abs=5e-4)


def test_derivative_link_charging(ref_design):
    state = ConverterState(0.0, 20.0, 650.0)
    di, dv = derivatives(state, 650.0, (650.0, 20.0), ref_design)
    assert dv == pytest.approx(20.0 / 120e-6)          # 166.67 kV/s
    assert dv == pytest.approx(166.67e3, rel=1e-4)


def test_derivative_blocked_sees_only_the_load():
    p = DabParams(load=LoadModel(kind="constant_current", i_o=5.0))
    state = ConverterState(0.0, 0.0, 300.0)
    di, dv = derivatives(state, None, (None, 0.0), p)
    assert di == 0.0
    assert dv == pytest.approx(-5.0 / 120e-6)


@given(i=st.floats(-50.0, 50.0).filter(lambda x: abs(x) > 1e-6),
       v_dc=st.floats(0.0, 1000.0))
def test_rectifier_consistency(i, v_dc):
    # With the secondary dead, a conducting topology pumps exactly
    # |i| / n into the link regardless of the current direction.
    p = DabParams()
    topo = resolve_topology(gv(), i, v_dc, p)
    assert topo.conducting
    got = rectified_current(topo, i, p.n)
    assert got == pytest.approx(abs(i) / p.n)
