"""Builds the node graph for a scenario and steps it to completion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..attacks import AttackNode, AttackSpec, run_attack
from ..avoidance import AvoidanceNode, PotentialFieldConfig
from ..bus import Event, Node, NodeSchedule, SimClock, SimCore, Stage
from ..guidance import SETPOINT_TOPIC, GuidanceNode, MissionPhase, Waypoint
from ..messages import LaserScan, NavSatFixMsg, OdometryMsg, PoseSetpoint
from ..sensors import FIX_TOPIC, ODOM_TOPIC, SCAN_TOPIC, GeoMap, GpsNode, LidarConfig, LidarNode
from ..vehicle import FlightController, Mode, Obstacle, VehicleParams, VehicleState, World
from .config import ScenarioConfig

LOG_COLUMNS = ("tick", "true_x", "true_y", "true_z", "true_psi", "odo_x", "odo_y", "odo_z",
               "set_x", "set_y", "set_z", "min_range", "mode", "attack_active")
MODES = list(Mode)
_MODE_INDEX = {m: i for i, m in enumerate(MODES)}
_NO_WRITER = -1


@dataclass
class TrajectoryLog:
    """Decimated per-tick records plus every event of the run."""

    scenario_id: str
    rows: list[tuple] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    columns: tuple[str, ...] = LOG_COLUMNS


@dataclass
class Trace:
    """Full-resolution arrays, one entry per executed tick."""

    tick: np.ndarray
    true_pos: np.ndarray  # (N, 3)
    true_psi: np.ndarray
    odo: np.ndarray  # (N, 3), nan before the first publication
    setpoint: np.ndarray  # (N, 3), nan when no setpoint is active
    min_range: np.ndarray
    mode: np.ndarray  # indices into MODES
    attack_active: np.ndarray
    # writer class currently held by each topic slot (-1: empty)
    writers: dict[str, np.ndarray]
    # True where the slot holds a payload written during that very tick
    fresh: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.tick)

    def index_of(self, tick: int) -> int:
        return int(np.searchsorted(self.tick, tick))


@dataclass
class RunResult:
    config: ScenarioConfig
    trace: Trace
    log: TrajectoryLog
    events: list[Event]
    outcome: str
    final_state: VehicleState
    reach_ticks: list[int]
    avoidance_ticks: list[int]
    attack_window: Optional[tuple[int, Optional[int]]]
    attack_publications: int
    destinations: dict[int, tuple[float, float, float]]
    ticks_run: int

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]


@dataclass
class Simulation:
    config: ScenarioConfig
    sim: SimCore
    fcu: FlightController
    guidance: GuidanceNode
    lidar: LidarNode
    gps: GpsNode
    avoidance: Optional[AvoidanceNode]
    attack: Optional[AttackNode]
    recorder: "_Recorder"


class _Recorder(Node):
    """Samples the bus after the controllers ran and before physics moves the vehicle."""

    stage = Stage.PHYSICS

    def __init__(self, fcu: FlightController, attack: Optional[AttackNode],
                 topics: tuple[str, ...], base_rate: float):
        self.schedule = NodeSchedule("recorder", base_rate)
        self.fcu = fcu
        self.attack = attack
        self.topics = topics
        self.rows: list[tuple] = []
        self.writers: list[tuple] = []
        self._last_scan: Optional[LaserScan] = None
        self._last_min = math.nan

    def on_tick(self, sim: SimCore, tick: int) -> None:
        st = self.fcu.state
        odom: Optional[OdometryMsg] = sim.sample_latest(ODOM_TOPIC)
        scan: Optional[LaserScan] = sim.sample_latest(SCAN_TOPIC)
        if scan is not self._last_scan:
            self._last_scan = scan
            self._last_min = math.nan if scan is None else float(scan.ranges.min())
        sp: Optional[PoseSetpoint] = self.fcu.active_setpoint(sim)
        x, y, z = st.position
        self.rows.append((
            tick, x, y, z, st.psi,
            *(odom.position if odom is not None else (math.nan,) * 3),
            *(sp.target if sp is not None else (math.nan,) * 3),
            self._last_min, _MODE_INDEX[st.mode],
            self.attack is not None and self.attack.active(tick),
        ))
        boxes = [sim.mailbox(t) for t in self.topics]
        self.writers.append(tuple(
            (_NO_WRITER if b.writer_class is None else int(b.writer_class), b.write_tick == tick)
            for b in boxes))


def attack_spec(config: ScenarioConfig) -> Optional[AttackSpec]:
    atk = config.attack
    if atk is None:
        return None
    return AttackSpec(kind=atk.kind, params=atk.params(), start_tick=atk.start_tick,
                      end_tick=atk.end_tick, duration_ticks=atk.duration_ticks,
                      rate_hz=atk.rate_hz, seed=config.attack_seed(), start_on=atk.start_on)


def build_simulation(config: ScenarioConfig, with_attack: bool = True) -> Simulation:
    sim = SimCore(SimClock(0, config.tick_duration))
    sim.declare_topic(SCAN_TOPIC, LaserScan)
    sim.declare_topic(ODOM_TOPIC, OdometryMsg)
    sim.declare_topic(FIX_TOPIC, NavSatFixMsg)
    sim.declare_topic(SETPOINT_TOPIC, PoseSetpoint)

    world = World(tuple(Obstacle(tuple(o.center), o.radius) for o in config.world.obstacles))
    v = config.vehicle
    start = VehicleState((v.start.x, v.start.y, v.start.z), math.radians(v.start.psi_deg))
    params = VehicleParams(v.v_max, v.omega_max, v.r_vehicle, v.takeoff_tolerance)
    lid_cfg = LidarConfig(config.lidar.range_min, config.lidar.range_max,
                          math.radians(config.lidar.mount_offset_deg))
    geo = GeoMap(config.world.geo_origin.lat, config.world.geo_origin.lon, config.world.scale)

    fcu = FlightController(start, world, params, SETPOINT_TOPIC, rate_hz=1.0 / config.tick_duration)
    truth = lambda: fcu.state  # noqa: E731
    lidar = sim.add_node(LidarNode(world, truth, lid_cfg, config.lidar.rate_hz))
    gps = sim.add_node(GpsNode(truth, geo, config.gps.rate_hz))

    spec = attack_spec(config) if with_attack else None
    av = config.avoidance
    attack = run_attack(sim, spec, lid_cfg, d0=av.d0) if spec is not None else None

    m = config.mission
    guidance = sim.add_node(GuidanceNode(
        fcu, [Waypoint(w.x, w.y, w.z, w.psi) for w in m.waypoint_list()],
        rate_hz=m.rate_hz, start_tick=m.start_tick, takeoff_alt=v.takeoff_alt,
        frame_samples=m.frame_samples, pos_tolerance=m.pos_tolerance,
        heading_tolerance=m.heading_tolerance))
    avoidance = None
    if av.enabled:
        pf = PotentialFieldConfig(av.k_att, av.k_rep, av.d0, av.activation_tolerance, av.step)
        avoidance = sim.add_node(AvoidanceNode(fcu, pf, av.rate_hz))

    topics = spec.topics if spec is not None else ()
    recorder = sim.add_node(_Recorder(fcu, attack, topics, sim.clock.base_rate))
    sim.add_node(fcu)
    fcu.attach(sim)
    return Simulation(config, sim, fcu, guidance, lidar, gps, avoidance, attack, recorder)


def _is_terminal(s: Simulation) -> bool:
    return s.fcu.mode is Mode.CRASHED or s.guidance.phase is MissionPhase.DONE


def execute(config: ScenarioConfig, log_every: int = 1, with_attack: bool = True) -> RunResult:
    """Run one scenario until a terminal event or ``duration_ticks``."""
    if log_every < 1:
        raise ValueError("log_every must be >= 1")
    s = build_simulation(config, with_attack)
    sim = s.sim
    stop_after: Optional[int] = None
    while sim.clock.tick < config.duration_ticks:
        sim.advance_tick()
        if stop_after is None and _is_terminal(s):
            # one more tick so the log shows the terminal mode
            stop_after = sim.clock.tick
        elif stop_after is not None:
            break
    outcome = s.guidance.finalize()

    rec = s.recorder
    cols = list(zip(*rec.rows)) if rec.rows else [()] * len(LOG_COLUMNS)
    arr = lambda i, dt=float: np.asarray(cols[i], dtype=dt)  # noqa: E731
    topics = rec.topics
    writers = {t: np.array([w[k][0] for w in rec.writers], dtype=int) for k, t in enumerate(topics)}
    fresh = {t: np.array([w[k][1] for w in rec.writers], dtype=bool) for k, t in enumerate(topics)}
    trace = Trace(
        tick=arr(0, int),
        true_pos=np.column_stack([arr(1), arr(2), arr(3)]) if rec.rows else np.empty((0, 3)),
        true_psi=arr(4),
        odo=np.column_stack([arr(5), arr(6), arr(7)]) if rec.rows else np.empty((0, 3)),
        setpoint=np.column_stack([arr(8), arr(9), arr(10)]) if rec.rows else np.empty((0, 3)),
        min_range=arr(11), mode=arr(12, int), attack_active=arr(13, bool),
        writers=writers, fresh=fresh,
    )
    log = TrajectoryLog(config.id, [
        r[:12] + (MODES[r[12]].value, int(r[13])) for r in rec.rows[::log_every]
    ], list(sim.events))

    window = None
    if s.attack is not None and s.attack.start is not None:
        window = (s.attack.start, s.attack.end)
    destinations = {e.data["index"]: e.data["setpoint"] for e in sim.events if e.kind == "destination"}
    return RunResult(
        config=config, trace=trace, log=log, events=list(sim.events), outcome=outcome,
        final_state=s.fcu.state, reach_ticks=list(s.guidance.mission.reach_ticks),
        avoidance_ticks=list(s.avoidance.trigger_ticks) if s.avoidance else [],
        attack_window=window,
        attack_publications=s.attack.publications if s.attack else 0,
        destinations=destinations, ticks_run=sim.clock.tick,
    )


def run_scenario(config: ScenarioConfig, log_every: int = 1):
    """Run ``config`` and evaluate its checks; returns ``(TrajectoryLog, Verdict)``."""
    from .checks import evaluate

    result = execute(config, log_every)
    return result.log, evaluate(result)
