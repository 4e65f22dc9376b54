import math

import pytest
from hypothesis import given, settings, strategies as st

from spoofsim.bus import SimClock, SimCore
from spoofsim.errors import GuidanceError, InitializationError
from spoofsim.guidance import (
    SETPOINT_TOPIC, GuidanceNode, LocalFrame, MissionPhase, Waypoint, check_waypoint_reached,
    heading_error, initialize_local_frame, rotate_to_local, set_destination, waypoint_errors,
)
from spoofsim.messages import OdometryMsg, PoseSetpoint
from spoofsim.sensors import FIX_TOPIC, ODOM_TOPIC, GpsNode
from spoofsim.messages import NavSatFixMsg
from spoofsim.vehicle import FlightController, Mode, VehicleState, World

FRAME90 = LocalFrame(90.0)


def odom(deg, x=0.0, y=0.0, z=0.0):
    return OdometryMsg(x, y, z, math.radians(deg))


# -- frame --------------------------------------------------------------------

@pytest.mark.parametrize("deg", [90.0, 180.0])
def test_constant_heading_offset(deg):
    assert initialize_local_frame([odom(deg)] * 100).local_offset_g == pytest.approx(deg, abs=1e-12)


def test_alternating_headings_average():
    f = initialize_local_frame([odom(89.0), odom(91.0)] * 50)
    assert f.local_offset_g == pytest.approx(90.0, abs=1e-9)


def test_frame_pose_is_mean_of_samples():
    f = initialize_local_frame([odom(90, 1, 2, 0), odom(90, 3, 4, 0)])
    assert f.local_offset_pose_g == pytest.approx((2.0, 3.0, 0.0))


def test_frame_without_samples_errors():
    with pytest.raises(InitializationError):
        initialize_local_frame([])


# -- set_destination ----------------------------------------------------------

def test_offset_90_is_identity_rotation():
    assert FRAME90.rotation == 0.0
    assert rotate_to_local(3.0, -2.0, FRAME90) == (3.0, -2.0)


def test_offset_180_is_quarter_turn():
    f = LocalFrame(180.0)
    assert f.rotation == pytest.approx(math.pi / 2)
    assert rotate_to_local(3.0, -2.0, f) == pytest.approx((2.0, 3.0))  # (-y, x)


def test_spoofed_pose_sends_vehicle_the_other_way():
    sp = set_destination(5, 0, 3, 0, FRAME90, (10.0, 0.0, 3.0), (0.0, 0.0, 3.0))
    assert sp.x == pytest.approx(-5.0)
    assert sp.y == 0.0 and sp.z == 3.0


def test_yaw_setpoint_adds_offset():
    sp = set_destination(0, 0, 0, 30.0, FRAME90, (0, 0, 0), (0, 0, 0))
    assert sp.psi == pytest.approx(math.radians(120.0))


def test_uninitialized_frame_rejected():
    with pytest.raises(GuidanceError):
        set_destination(1, 2, 3, 0, None, (0, 0, 0), (0, 0, 0))


pos = st.tuples(*[st.floats(-100, 100)] * 3)


@settings(max_examples=200, deadline=None)
@given(pos, pos, st.floats(0, 360))
def test_genuine_odometry_gives_rotated_waypoint(wp, pose, offset):
    frame = LocalFrame(offset)
    sp = set_destination(*wp, 0.0, frame, pose, pose)
    lx, ly = rotate_to_local(wp[0], wp[1], frame)
    assert sp.target == pytest.approx((lx, ly, wp[2]), abs=1e-9)


# -- reach check --------------------------------------------------------------

def test_exact_pose_reached():
    assert check_waypoint_reached((1, 2, 3), (1, 2, 3), 10.0, 10.0)


def test_three_four_twelve():
    d, h = waypoint_errors((1, 2, 2), (0, 0, 0), 0.0, 0.0)
    assert d == 3.0 and h == 0.0
    assert not check_waypoint_reached((1, 2, 2), (0, 0, 0), 0.0, 0.0)


def test_opposite_heading_chord_is_two():
    assert heading_error(0.0, 180.0) == pytest.approx(2.0, abs=1e-12)
    assert not check_waypoint_reached((0, 0, 0), (0, 0, 0), 0.0, 180.0)


def test_position_tolerance_is_strict():
    assert not check_waypoint_reached((0.3, 0, 0), (0, 0, 0), 0, 0, pos_tolerance=0.3)
    assert check_waypoint_reached((0.2999, 0, 0), (0, 0, 0), 0, 0, pos_tolerance=0.3)


@settings(max_examples=300, deadline=None)
@given(st.floats(-720, 720), st.floats(-720, 720))
def test_heading_error_chord_identity(a, b):
    expected = 2.0 * abs(math.sin(math.radians(a - b) / 2.0))
    assert heading_error(a, b) == pytest.approx(expected, abs=1e-12)


# -- mission loop ---------------------------------------------------------------

def mission(waypoints, start_tick=0, odom_topic=ODOM_TOPIC, with_gps=True, samples=5):
    sim = SimCore(SimClock())
    sim.declare_topic(ODOM_TOPIC, OdometryMsg)
    sim.declare_topic(FIX_TOPIC, NavSatFixMsg)
    sim.declare_topic(SETPOINT_TOPIC, PoseSetpoint)
    fcu = FlightController(VehicleState(psi=math.pi / 2), World())
    if with_gps:
        sim.add_node(GpsNode(lambda: fcu.state))
    g = sim.add_node(GuidanceNode(fcu, waypoints, start_tick=start_tick, frame_samples=samples,
                                  odom_topic=odom_topic))
    sim.add_node(fcu)
    fcu.attach(sim)
    return sim, fcu, g


def run_until(sim, pred, limit=60000):
    while sim.clock.tick < limit and not pred():
        sim.advance_tick()


def kinds(sim):
    return [e.kind for e in sim.events if e.source == "gnc"]


def test_start_at_tick_zero_guided_immediately():
    sim, fcu, g = mission([])
    sim.advance_tick()
    assert fcu.mode is Mode.GUIDED
    assert sim.events[0].tick == 0


def test_delayed_start_not_before_configured_tick():
    sim, fcu, g = mission([], start_tick=500)
    run_until(sim, lambda: fcu.mode is Mode.GUIDED, 2000)
    start = next(e for e in sim.events if e.kind == "start")
    assert start.tick >= 500


def test_no_start_signal_stays_waiting():
    sim, fcu, g = mission([], start_tick=None)
    run_until(sim, lambda: False, 3000)
    assert g.phase is MissionPhase.WAITING_START and fcu.mode is Mode.IDLE


def test_nominal_single_waypoint_mission():
    sim, fcu, g = mission([Waypoint(5, 0, 3, 0)])
    run_until(sim, lambda: g.phase is MissionPhase.DONE)
    assert kinds(sim) == ["start", "frame_initialized", "takeoff", "takeoff_complete",
                          "destination", "reach", "land", "done"]
    assert g.mission.outcome == "completed"
    assert fcu.mode is Mode.LANDED
    assert fcu.state.position == pytest.approx((5.0, 0.0, 0.0), abs=0.3)


def test_empty_waypoint_list_takes_off_then_lands():
    sim, fcu, g = mission([])
    run_until(sim, lambda: g.phase is MissionPhase.DONE)
    assert kinds(sim) == ["start", "frame_initialized", "takeoff", "takeoff_complete", "land", "done"]


def test_missing_odometry_aborts():
    sim, fcu, g = mission([], with_gps=False)
    run_until(sim, lambda: g.mission.outcome is not None, 3000)
    assert g.mission.outcome == "aborted"
    assert kinds(sim)[-1] == "aborted"


def test_takeoff_guards():
    sim, fcu, g = mission([])
    g._sim = sim
    with pytest.raises(GuidanceError):
        g.takeoff(0.0)
    with pytest.raises(GuidanceError):
        g.takeoff(3.0)  # still Idle
    fcu.state = VehicleState((0, 0, 3), 0.0, mode=Mode.FLYING)
    with pytest.raises(GuidanceError):
        g.takeoff(3.0)  # already airborne


def test_land_requires_airborne():
    sim, fcu, g = mission([])
    g._sim = sim
    with pytest.raises(GuidanceError):
        g.land()


def test_finalize_labels_hover_when_stuck_en_route():
    sim, fcu, g = mission([Waypoint(5, 0, 3, 0)])
    run_until(sim, lambda: "destination" in kinds(sim))
    g.pos_tolerance = 0.0  # strict test: never passes
    run_until(sim, lambda: False, sim.clock.tick + 5000)
    assert g.finalize() == "hovering"
    assert g.phase is MissionPhase.HOVERING
