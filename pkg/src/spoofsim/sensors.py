"""Genuine sensors: planar LiDAR ray casting and GPS/odometry publication."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bus import Node, NodeSchedule, SimCore, Stage
from .messages import ANGLE_INCREMENT, N_RAYS, LaserScan, NavSatFixMsg, OdometryMsg
from .vehicle import VehicleState, World

SCAN_TOPIC = "/spur/laser/scan"
ODOM_TOPIC = "/mavros/global_position/local"
FIX_TOPIC = "/mavros/global_position/global"

SENSOR_RATE_HZ = 10.0


@dataclass(frozen=True)
class LidarConfig:
    range_min: float = 0.1
    range_max: float = 30.0
    # body angle of ray 0, radians
    mount_offset: float = 0.0

    def __post_init__(self):
        if not 0 <= self.range_min < self.range_max:
            raise ValueError("need 0 <= range_min < range_max")


def ray_directions(heading: float, config: LidarConfig = LidarConfig()) -> np.ndarray:
    """World-frame unit vectors of all rays, shape (N_RAYS, 2)."""
    ang = heading + config.mount_offset + np.arange(N_RAYS) * ANGLE_INCREMENT
    return np.column_stack((np.cos(ang), np.sin(ang)))


def raycast(origin, directions: np.ndarray, world: World) -> np.ndarray:
    """Distance to the nearest disc along each ray (``inf`` when nothing is hit)."""
    n = directions.shape[0]
    if not world.obstacles:
        return np.full(n, np.inf)
    m = np.asarray(origin, dtype=float)[:2] - world.centers  # (K, 2)
    # elementwise products keep each ray/disc pair independent of how many discs exist
    b = directions[:, :1] * m[:, 0] + directions[:, 1:] * m[:, 1]  # (N, K)
    c = np.einsum("ij,ij->i", m, m) - world.radii**2  # (K,)
    disc = b * b - c
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    near = -b - sq
    far = -b + sq
    t = np.where(near > 0.0, near, np.where(far > 0.0, far, np.inf))
    t = np.where(hit, t, np.inf)
    return t.min(axis=1)


def lidar_scan(world: World, x: float, y: float, heading: float,
               config: LidarConfig = LidarConfig()) -> LaserScan:
    dist = raycast((x, y), ray_directions(heading, config), world)
    ranges = np.clip(np.where(np.isfinite(dist), dist, config.range_max),
                     config.range_min, config.range_max)
    return LaserScan(ranges, config.range_min, config.range_max, config.mount_offset)


@dataclass(frozen=True)
class GeoMap:
    """Equirectangular map between local meters and degrees."""

    origin_lat: float = 47.0
    origin_lon: float = 11.0
    scale: float = 1e-5  # degrees per meter

    def to_fix(self, x: float, y: float) -> NavSatFixMsg:
        return NavSatFixMsg(self.origin_lat + y * self.scale, self.origin_lon + x * self.scale)

    def to_local(self, fix: NavSatFixMsg) -> tuple[float, float]:
        return ((fix.longitude - self.origin_lon) / self.scale,
                (fix.latitude - self.origin_lat) / self.scale)


def publish_gps(state: VehicleState, geo: GeoMap = GeoMap()) -> tuple[NavSatFixMsg, OdometryMsg]:
    x, y, z = state.position
    return geo.to_fix(x, y), OdometryMsg(x, y, z, state.psi)


class LidarNode(Node):
    stage = Stage.SENSOR

    def __init__(self, world: World, truth: Callable[[], VehicleState],
                 config: LidarConfig = LidarConfig(), rate_hz: float = SENSOR_RATE_HZ,
                 topic: str = SCAN_TOPIC, node_id: str = "lidar", phase: int = 0):
        self.schedule = NodeSchedule(node_id, rate_hz, phase)
        self.world = world
        self.truth = truth
        self.config = config
        self.topic = topic

    def on_tick(self, sim: SimCore, tick: int) -> None:
        st = self.truth()
        sim.publish(self.node_id, self.topic,
                    lidar_scan(self.world, st.position[0], st.position[1], st.psi, self.config))


class GpsNode(Node):
    stage = Stage.SENSOR

    def __init__(self, truth: Callable[[], VehicleState], geo: GeoMap = GeoMap(),
                 rate_hz: float = SENSOR_RATE_HZ, node_id: str = "gps", phase: int = 0,
                 fix_topic: str = FIX_TOPIC, odom_topic: str = ODOM_TOPIC):
        self.schedule = NodeSchedule(node_id, rate_hz, phase)
        self.truth = truth
        self.geo = geo
        self.fix_topic = fix_topic
        self.odom_topic = odom_topic

    def on_tick(self, sim: SimCore, tick: int) -> None:
        fix, odom = publish_gps(self.truth(), self.geo)
        sim.publish(self.node_id, self.fix_topic, fix)
        sim.publish(self.node_id, self.odom_topic, odom)
