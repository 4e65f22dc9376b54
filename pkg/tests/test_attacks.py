import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spoofsim.attacks import (
    AttackKind, AttackNode, AttackSpec, NoiseStream, StartTrigger, build_front_object_scan,
    build_gps_jam, build_gps_spoof, build_noise_scan, build_uniform_scan, front_object_ranges,
    run_attack,
)
from spoofsim.bus import SimClock, SimCore, WriterClass
from spoofsim.errors import UnknownTopicError
from spoofsim.messages import N_RAYS, LaserScan, NavSatFixMsg, OdometryMsg
from spoofsim.sensors import FIX_TOPIC, ODOM_TOPIC, SCAN_TOPIC, GpsNode, LidarConfig, LidarNode
from spoofsim.vehicle import Mode, VehicleState, World

# -- builders -------------------------------------------------------------------

@pytest.mark.parametrize("d", [15.0, 1.0])
def test_uniform_scan_all_rays(d):
    scan = build_uniform_scan(d)
    assert scan.ranges.shape == (N_RAYS,) and np.all(scan.ranges == d)


def test_uniform_at_range_max_equals_empty_world():
    from spoofsim.sensors import lidar_scan
    assert build_uniform_scan(30.0).same_as(lidar_scan(World(), 1.0, 2.0, 0.5))


@pytest.mark.parametrize("d", [0.05, 30.5, math.nan])
def test_uniform_out_of_range_rejected(d):
    with pytest.raises(ValueError):
        build_uniform_scan(d)


def test_degenerate_noise_bounds_constant():
    scan = build_noise_scan((5.0, 5.0), np.random.default_rng(0))
    assert np.all(scan.ranges == 5.0)


def test_noise_scan_seeded_replay():
    a = build_noise_scan((1, 29), np.random.default_rng(42))
    b = build_noise_scan((1, 29), np.random.default_rng(42))
    assert a.same_as(b)


def test_noise_scan_mean_concentrates():
    scan = build_noise_scan((1.0, 29.0), np.random.default_rng(3))
    assert 13.0 <= scan.ranges.mean() <= 17.0
    assert scan.ranges.min() >= 1.0 and scan.ranges.max() <= 29.0


@pytest.mark.parametrize("bounds", [(5, 4), (0.0, 10), (1, 31), (math.nan, 2)])
def test_noise_bounds_validated(bounds):
    with pytest.raises(ValueError):
        build_noise_scan(bounds, np.random.default_rng(0))


def test_front_object_anchor_values():
    r = build_front_object_scan(2.0, 15.0).ranges
    assert (r[255], r[256], r[128], r[383], r[0]) == (2.0, 2.0, 15.0, 15.0, 15.0)
    assert r.min() == 2.0 and set(np.flatnonzero(r == 2.0)) == {255, 256}


def test_front_object_interpolation_oracle():
    r = front_object_ranges(2.0, 15.0)
    for i in range(128, 256):
        assert r[i] == pytest.approx(15.0 + (2.0 - 15.0) * (i - 128) / 127, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 14.0), st.floats(0.01, 15.0))
def test_front_object_shape_properties(d_front, gap):
    v_out = min(d_front + gap, 30.0)
    r = front_object_ranges(d_front, v_out)
    i = np.arange(128, 384)
    assert np.array_equal(r[i], r[511 - i])
    assert np.all(np.diff(r[128:256]) <= 0) and np.all(np.diff(r[256:384]) >= 0)
    assert np.all(r[:128] == v_out) and np.all(r[384:] == v_out)


def test_front_object_validation():
    with pytest.raises(ValueError):
        build_front_object_scan(15.0, 2.0)
    with pytest.raises(ValueError):
        build_front_object_scan(2.0, 15.0, d0=1.5)
    build_front_object_scan(2.0, 15.0, d0=3.0)


def test_gps_spoof_propagation_rule():
    fix, odom = build_gps_spoof(47.0, 11.0)
    assert (fix.latitude, fix.longitude) == (47.0, 11.0)
    assert (odom.x, odom.y) == (11.0, 47.0)


def test_gps_spoof_zero():
    _, odom = build_gps_spoof(0.0, 0.0)
    assert (odom.x, odom.y) == (0.0, 0.0)


@settings(max_examples=200)
@given(st.floats(-90, 90), st.floats(-180, 180))
def test_propagation_rule_exact(lat, lon):
    fix, odom = build_gps_spoof(lat, lon)
    assert odom.x == fix.longitude and odom.y == fix.latitude


def test_gps_jam_degenerate_equals_spoof():
    jam = build_gps_jam((47.0, 47.0), (11.0, 11.0), np.random.default_rng(5), 3.0, 1.0)
    assert jam == build_gps_spoof(47.0, 11.0, 3.0, 1.0)


def test_gps_jam_seeded_replay():
    seq = lambda: [build_gps_jam((0, 1), (2, 3), rng) for rng in [np.random.default_rng(9)] for _ in range(5)]
    assert seq() == seq()


def test_gps_jam_bounds_validated():
    with pytest.raises(ValueError):
        build_gps_jam((1, 0), (0, 1), np.random.default_rng(0))


def test_noise_stream_is_pure_in_seed_and_tick():
    a = NoiseStream(7, 4)
    b = NoiseStream(7, 4)
    forward = [a.unit(t).copy() for t in range(300)]
    backward = [b.unit(t).copy() for t in reversed(range(300))][::-1]
    assert all(np.array_equal(x, y) for x, y in zip(forward, backward))
    assert not np.array_equal(NoiseStream(8, 4).unit(0), forward[0])


# -- specs ------------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValueError):
        AttackSpec(AttackKind.LIDAR_UNIFORM, {"distance": 1}, start_tick=5, end_tick=5)
    with pytest.raises(ValueError):
        AttackSpec(AttackKind.LIDAR_UNIFORM, {"distance": 1}, rate_hz=5)
    with pytest.raises(ValueError):
        AttackSpec(AttackKind.GPS_JAM, {}, start_on="takeoff_complete", end_tick=10)
    with pytest.raises(ValueError):
        AttackSpec("Bogus", {})


def test_spec_topics():
    assert AttackSpec(AttackKind.LIDAR_JAM, {}).topics == (SCAN_TOPIC,)
    assert set(AttackSpec(AttackKind.GPS_JAM, {}).topics) == {FIX_TOPIC, ODOM_TOPIC}


# -- injector on the bus ------------------------------------------------------------

def lidar_bus():
    sim = SimCore(SimClock())
    sim.declare_topic(SCAN_TOPIC, LaserScan)
    state = VehicleState((0, 0, 2), 0.0, mode=Mode.FLYING)
    sim.add_node(LidarNode(World(), lambda: state))
    return sim


def test_window_dominance_and_recovery():
    sim = lidar_bus()
    node = run_attack(sim, AttackSpec(AttackKind.LIDAR_UNIFORM, {"distance": 1.0},
                                      start_tick=1000, end_tick=5000))
    seen = []
    for _ in range(5200):
        tick = sim.clock.tick
        sim.advance_tick()
        seen.append((tick, sim.mailbox(SCAN_TOPIC).writer_class))
    inside = [w for t, w in seen if 1000 <= t < 5000]
    assert all(w is WriterClass.ATTACKER for w in inside) and len(inside) == 4000
    assert all(w is WriterClass.GENUINE for t, w in seen if t < 1000)
    back = next(t for t, w in seen if t >= 5000 and w is WriterClass.GENUINE)
    assert back - 5000 <= 100
    assert node.publications == 4000
    assert [e.kind for e in sim.events] == ["attack_start", "attack_end"]


def test_later_registered_attacker_wins_overlap():
    sim = lidar_bus()
    run_attack(sim, AttackSpec(AttackKind.LIDAR_UNIFORM, {"distance": 1.0}), node_id="a1")
    run_attack(sim, AttackSpec(AttackKind.LIDAR_UNIFORM, {"distance": 2.0}), node_id="a2")
    for _ in range(50):
        sim.advance_tick()
        assert sim.mailbox(SCAN_TOPIC).writer_id == "a2"


def test_unknown_topic_rejected():
    sim = SimCore(SimClock())
    with pytest.raises(UnknownTopicError):
        run_attack(sim, AttackSpec(AttackKind.LIDAR_UNIFORM, {"distance": 1.0}))


def gps_bus(state):
    sim = SimCore(SimClock())
    sim.declare_topic(FIX_TOPIC, NavSatFixMsg)
    sim.declare_topic(ODOM_TOPIC, OdometryMsg)
    sim.add_node(GpsNode(lambda: state))
    return sim


def test_gps_attack_keeps_genuine_altitude_and_heading():
    state = VehicleState((1.0, 2.0, 3.0), 0.5, mode=Mode.FLYING)
    sim = gps_bus(state)
    run_attack(sim, AttackSpec(AttackKind.GPS_FIXED_SPOOF, {"latitude": 47.0, "longitude": 11.0},
                               start_tick=150))
    for _ in range(300):
        sim.advance_tick()
    odom = sim.sample_latest(ODOM_TOPIC)
    assert odom == OdometryMsg(11.0, 47.0, 3.0, 0.5)


def test_displacement_freezes_at_attack_start():
    state = VehicleState((1.0, 2.0, 3.0), 0.5, mode=Mode.FLYING)
    sim = gps_bus(state)
    run_attack(sim, AttackSpec(AttackKind.GPS_FIXED_SPOOF, {"displacement": (10.0, 0.0)},
                               start_tick=150))
    for _ in range(300):
        sim.advance_tick()
    odom = sim.sample_latest(ODOM_TOPIC)
    fix = sim.sample_latest(FIX_TOPIC)
    assert (odom.x, odom.y, odom.z) == (11.0, 2.0, 3.0)
    assert (odom.x, odom.y) == (fix.longitude, fix.latitude)


def test_event_trigger_opens_window_next_tick():
    sim = lidar_bus()
    node = run_attack(sim, AttackSpec(AttackKind.LIDAR_UNIFORM, {"distance": 1.0}, start_tick=None,
                                      start_on=StartTrigger.TAKEOFF_COMPLETE, duration_ticks=50))
    for _ in range(10):
        sim.advance_tick()
    assert node.start is None
    sim.emit("gnc", "takeoff_complete")
    sim.advance_tick()
    assert (node.start, node.end) == (11, 61)


def test_jam_payload_pure_function_of_seed_and_tick():
    spec = AttackSpec(AttackKind.LIDAR_JAM, {"bounds": (1.0, 29.0)}, seed=4)
    a, b = AttackNode(spec), AttackNode(spec)
    pa = [a.payloads(t)[0][1].ranges for t in (5, 900, 17)]
    pb = [b.payloads(t)[0][1].ranges for t in (17, 5, 900)]
    assert np.array_equal(pa[0], pb[1]) and np.array_equal(pa[1], pb[2]) and np.array_equal(pa[2], pb[0])


def test_lidar_payloads_always_1024():
    for kind, p in [(AttackKind.LIDAR_UNIFORM, {"distance": 4.0}),
                    (AttackKind.LIDAR_JAM, {"bounds": (1.0, 5.0)}),
                    (AttackKind.LIDAR_FRONT_OBJECT, {"d_front": 2.0, "v_out": 15.0})]:
        node = AttackNode(AttackSpec(kind, p), LidarConfig())
        assert len(node.payloads(3)[0][1].ranges) == N_RAYS
