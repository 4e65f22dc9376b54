"""Counterfeit LiDAR and GPS payloads and the injector nodes that flood them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .bus import Node, NodeSchedule, SimCore, Stage, WriterClass
from .messages import N_RAYS, LaserScan, NavSatFixMsg, OdometryMsg
from .sensors import FIX_TOPIC, ODOM_TOPIC, SCAN_TOPIC, SENSOR_RATE_HZ, LidarConfig

ATTACK_RATE_HZ = 1000.0
EIGHTH = N_RAYS // 8  # 128 rays


class AttackKind(str, Enum):
    LIDAR_UNIFORM = "LidarUniform"
    LIDAR_JAM = "LidarJam"
    LIDAR_FRONT_OBJECT = "LidarFrontObject"
    GPS_FIXED_SPOOF = "GpsFixedSpoof"
    GPS_JAM = "GpsJam"

    @property
    def is_lidar(self) -> bool:
        return self.value.startswith("Lidar")


class StartTrigger(str, Enum):
    TICK = "tick"
    TAKEOFF_COMPLETE = "takeoff_complete"
    FIRST_DESTINATION = "first_destination"


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    params: dict = field(default_factory=dict)
    start_tick: Optional[int] = 0
    end_tick: Optional[int] = None  # None: until the run stops
    duration_ticks: Optional[int] = None  # alternative to end_tick, counted from the start
    rate_hz: float = ATTACK_RATE_HZ
    seed: int = 0
    start_on: StartTrigger = StartTrigger.TICK

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "start_on", StartTrigger(self.start_on))
        if self.start_on is StartTrigger.TICK:
            if self.start_tick is None or self.start_tick < 0:
                raise ValueError("tick-triggered attack needs start_tick >= 0")
            if self.end_tick is not None and not self.start_tick < self.end_tick:
                raise ValueError("start_tick must be < end_tick")
        elif self.end_tick is not None:
            raise ValueError("event-triggered attacks bound their window with duration_ticks")
        if self.duration_ticks is not None and self.duration_ticks <= 0:
            raise ValueError("duration_ticks must be positive")
        if self.rate_hz < SENSOR_RATE_HZ:
            raise ValueError(f"attack rate {self.rate_hz} Hz is below the genuine sensor rate")

    @property
    def topics(self) -> tuple[str, ...]:
        return (SCAN_TOPIC,) if self.kind.is_lidar else (FIX_TOPIC, ODOM_TOPIC)


# -- payload builders ---------------------------------------------------------

def _check_range(value: float, lidar: LidarConfig, what: str) -> None:
    if not lidar.range_min <= value <= lidar.range_max:
        raise ValueError(f"{what} {value} outside [{lidar.range_min}, {lidar.range_max}]")


def _scan(ranges: np.ndarray, lidar: LidarConfig) -> LaserScan:
    return LaserScan(ranges, lidar.range_min, lidar.range_max, lidar.mount_offset)


def build_uniform_scan(distance: float, lidar: LidarConfig = LidarConfig()) -> LaserScan:
    _check_range(distance, lidar, "distance")
    return _scan(np.full(N_RAYS, float(distance)), lidar)


def build_noise_scan(bounds: Sequence[float], rng: np.random.Generator,
                     lidar: LidarConfig = LidarConfig()) -> LaserScan:
    return _noise_scan(bounds, rng.random(N_RAYS), lidar)


def _noise_scan(bounds, unit: np.ndarray, lidar: LidarConfig) -> LaserScan:
    lo, hi = _check_bounds(bounds)
    _check_range(lo, lidar, "lower bound")
    _check_range(hi, lidar, "upper bound")
    return _scan(lo + (hi - lo) * unit, lidar)


def front_object_ranges(d_front: float, v_out: float) -> np.ndarray:
    """Spoofed obstacle at the tip between the second and third eighth.

    Rays 255 and 256 read ``d_front``; the values rise linearly to ``v_out``
    at rays 128 and 383, and every ray outside that span reads ``v_out``.
    """
    ranges = np.full(N_RAYS, float(v_out))
    i = np.arange(EIGHTH, 2 * EIGHTH)
    ranges[EIGHTH:2 * EIGHTH] = v_out + (d_front - v_out) * (i - EIGHTH) / (EIGHTH - 1)
    ranges[2 * EIGHTH - 1] = d_front
    ranges[2 * EIGHTH:3 * EIGHTH] = ranges[EIGHTH:2 * EIGHTH][::-1]
    return ranges


def build_front_object_scan(d_front: float, v_out: float, lidar: LidarConfig = LidarConfig(),
                            d0: Optional[float] = None) -> LaserScan:
    _check_range(d_front, lidar, "d_front")
    _check_range(v_out, lidar, "v_out")
    if not d_front < v_out:
        raise ValueError("d_front must be smaller than v_out")
    if d0 is not None and not d_front < d0 <= v_out:
        raise ValueError(f"need d_front < d0 <= v_out (d0={d0})")
    return _scan(front_object_ranges(d_front, v_out), lidar)


def build_gps_spoof(latitude: float, longitude: float, z: float = 0.0,
                    heading: float = 0.0) -> tuple[NavSatFixMsg, OdometryMsg]:
    fix = NavSatFixMsg(float(latitude), float(longitude))
    # counterfeit fix propagated verbatim into the local odometry
    odom = OdometryMsg(fix.longitude, fix.latitude, z, heading)
    return fix, odom


def build_gps_jam(lat_bounds: Sequence[float], lon_bounds: Sequence[float],
                  rng: np.random.Generator, z: float = 0.0,
                  heading: float = 0.0) -> tuple[NavSatFixMsg, OdometryMsg]:
    return _gps_jam(lat_bounds, lon_bounds, rng.random(2), z, heading)


def _gps_jam(lat_bounds, lon_bounds, unit, z, heading):
    lat_lo, lat_hi = _check_bounds(lat_bounds)
    lon_lo, lon_hi = _check_bounds(lon_bounds)
    u_lat, u_lon = unit
    return build_gps_spoof(lat_lo + (lat_hi - lat_lo) * u_lat,
                           lon_lo + (lon_hi - lon_lo) * u_lon, z, heading)


def _check_bounds(bounds: Sequence[float]) -> tuple[float, float]:
    lo, hi = (float(b) for b in bounds)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"invalid bounds {bounds!r}")
    return lo, hi


class NoiseStream:
    """Uniform draws that depend only on ``(seed, tick)``.

    Generators are built per block of ticks; one row of the block belongs to
    each tick, so reading any tick in any order yields the same values.
    """

    def __init__(self, seed: int, width: int, block: int = 128):
        self.seed = seed
        self.width = width
        self.block = block
        self._block_id: Optional[int] = None
        self._rows: Optional[np.ndarray] = None

    def unit(self, tick: int) -> np.ndarray:
        bid, row = divmod(tick, self.block)
        if bid != self._block_id:
            rng = np.random.default_rng([self.seed, bid])
            self._rows = rng.random((self.block, self.width))
            self._block_id = bid
        return self._rows[row]


# -- injector -------------------------------------------------------------------

class AttackNode(Node):
    stage = Stage.ATTACKER

    def __init__(self, spec: AttackSpec, lidar: LidarConfig = LidarConfig(),
                 node_id: Optional[str] = None, d0: Optional[float] = None):
        self.spec = spec
        self.schedule = NodeSchedule(node_id or f"attack_{spec.kind.value}", spec.rate_hz,
                                     writer_class=WriterClass.ATTACKER)
        self.lidar = lidar
        self.start: Optional[int] = None
        self.end: Optional[int] = None
        if spec.start_on is StartTrigger.TICK:
            self._open_window(spec.start_tick)
        self.publications = 0
        self.last_genuine_odom: Optional[OdometryMsg] = None
        self._event_cursor = 0
        self._ended = False
        self._frozen: Optional[tuple[NavSatFixMsg, OdometryMsg]] = None
        self._noise = NoiseStream(spec.seed, N_RAYS if spec.kind.is_lidar else 2)
        self._static_scan: Optional[LaserScan] = None
        p = spec.params
        if spec.kind is AttackKind.LIDAR_UNIFORM:
            self._static_scan = build_uniform_scan(p["distance"], lidar)
        elif spec.kind is AttackKind.LIDAR_FRONT_OBJECT:
            self._static_scan = build_front_object_scan(p["d_front"], p["v_out"], lidar, d0)

    def _open_window(self, start: int) -> None:
        self.start = start
        if self.spec.duration_ticks is not None:
            self.end = start + self.spec.duration_ticks
        else:
            self.end = self.spec.end_tick

    def active(self, tick: int) -> bool:
        return self.start is not None and self.start <= tick and (self.end is None or tick < self.end)

    def _resolve_trigger(self, sim: SimCore) -> None:
        wanted = {StartTrigger.TAKEOFF_COMPLETE: "takeoff_complete",
                  StartTrigger.FIRST_DESTINATION: "destination"}[self.spec.start_on]
        events = sim.events
        while self._event_cursor < len(events):
            ev = events[self._event_cursor]
            self._event_cursor += 1
            if ev.kind == wanted:
                self._open_window(ev.tick + 1)
                sim.emit(self.node_id, "attack_armed", start=self.start)
                return

    def on_tick(self, sim: SimCore, tick: int) -> None:
        if self.start is None:
            self._resolve_trigger(sim)
        if not self.spec.kind.is_lidar:
            box = sim.mailbox(ODOM_TOPIC)
            if box.payload is not None and box.writer_class is WriterClass.GENUINE:
                self.last_genuine_odom = box.payload
        if not self.active(tick):
            if self.end is not None and tick >= self.end and not self._ended:
                self._ended = True
                sim.emit(self.node_id, "attack_end")
            return
        if tick == self.start:
            sim.emit(self.node_id, "attack_start", attack=self.spec.kind.value)
        for topic, payload in self.payloads(tick):
            sim.publish(self.node_id, topic, payload)
        self.publications += 1

    def payloads(self, tick: int) -> list[tuple[str, object]]:
        kind, p = self.spec.kind, self.spec.params
        if self._static_scan is not None:
            return [(SCAN_TOPIC, self._static_scan)]
        if kind is AttackKind.LIDAR_JAM:
            return [(SCAN_TOPIC, _noise_scan(p["bounds"], self._noise.unit(tick), self.lidar))]
        ref = self.last_genuine_odom or OdometryMsg(0.0, 0.0, 0.0, 0.0)
        if kind is AttackKind.GPS_FIXED_SPOOF:
            if "displacement" in p:
                if self._frozen is None:
                    dx, dy = p["displacement"]
                    self._frozen = build_gps_spoof(ref.y + dy, ref.x + dx, ref.z, ref.heading)
                fix, odom = self._frozen
            else:
                fix, odom = build_gps_spoof(p["latitude"], p["longitude"], ref.z, ref.heading)
        else:
            fix, odom = _gps_jam(p["lat_bounds"], p["lon_bounds"], self._noise.unit(tick),
                                 ref.z, ref.heading)
        return [(FIX_TOPIC, fix), (ODOM_TOPIC, odom)]


def run_attack(sim: SimCore, spec: AttackSpec, lidar: LidarConfig = LidarConfig(),
               node_id: Optional[str] = None, d0: Optional[float] = None) -> AttackNode:
    """Register an injector for ``spec`` on ``sim``."""
    for topic in spec.topics:
        sim.mailbox(topic)
    return sim.add_node(AttackNode(spec, lidar, node_id, d0))
