"""Artificial potential field obstacle avoidance driven by the laser scan.

Attractive potential ``U_att = k_att/2 * |p - g|^2`` toward the mission
setpoint.  Every ray hit closer than ``d0`` is treated as a point obstacle
with the FIRAS potential ``U_rep = k_rep/2 * (1/d - 1/d0)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bus import Node, NodeSchedule, SimCore, Stage
from .messages import LaserScan, OdometryMsg, PoseSetpoint
from .guidance import SETPOINT_TOPIC
from .sensors import ODOM_TOPIC, SCAN_TOPIC, SENSOR_RATE_HZ
from .vehicle import FlightController, Mode

# combined force below this fraction of the summed term magnitudes counts as zero
CANCELLATION_TOL = 1e-9


@dataclass(frozen=True)
class PotentialFieldConfig:
    k_att: float = 1.0
    k_rep: float = 1.0
    d0: float = 3.0
    activation_tolerance: float = 3.0
    step: float = 1.0

    def __post_init__(self):
        if not (self.k_att > 0 and self.k_rep > 0):
            raise ValueError("potential gains must be positive")
        if not self.d0 > 0:
            raise ValueError("d0 must be positive")
        if self.activation_tolerance > self.d0:
            raise ValueError("activation_tolerance must not exceed d0")
        if not self.step > 0:
            raise ValueError("step must be positive")


def attractive_potential(current_xy, goal_xy, k_att: float) -> float:
    dx = current_xy[0] - goal_xy[0]
    dy = current_xy[1] - goal_xy[1]
    return 0.5 * k_att * (dx * dx + dy * dy)


def compute_attractive(current_xy, goal_xy, k_att: float) -> np.ndarray:
    return -k_att * (np.asarray(current_xy[:2], dtype=float) - np.asarray(goal_xy[:2], dtype=float))


def repulsive_potential(point_xy, obstacle_xy, k_rep: float, d0: float) -> float:
    d = math.hypot(point_xy[0] - obstacle_xy[0], point_xy[1] - obstacle_xy[1])
    if d >= d0:
        return 0.0
    return 0.5 * k_rep * (1.0 / d - 1.0 / d0) ** 2


def repulsive_force(point_xy, obstacle_xy, k_rep: float, d0: float) -> np.ndarray:
    """Force from a single point obstacle (negative gradient of its potential)."""
    diff = np.asarray(point_xy[:2], dtype=float) - np.asarray(obstacle_xy[:2], dtype=float)
    d = float(np.hypot(*diff))
    if d >= d0:
        return np.zeros(2)
    return k_rep * (1.0 / d - 1.0 / d0) / (d * d) * (diff / d)


def _ray_terms(scan: LaserScan, heading: float, k_rep: float, d0: float):
    d = np.maximum(scan.ranges, scan.range_min)
    inside = d < d0
    ang = heading + scan.ray_angles()
    mag = np.where(inside, k_rep * (1.0 / d - 1.0 / d0) / (d * d), 0.0)
    # push away from the hit point, i.e. against the ray direction
    fx = -mag * np.cos(ang)
    fy = -mag * np.sin(ang)
    return fx, fy, mag


def compute_repulsive(scan: LaserScan, heading: float, k_rep: float, d0: float) -> np.ndarray:
    fx, fy, _ = _ray_terms(scan, heading, k_rep, d0)
    return np.array([fx.sum(), fy.sum()])


def avoidance_step(scan: LaserScan, pose: OdometryMsg, goal: PoseSetpoint,
                   config: PotentialFieldConfig) -> Optional[PoseSetpoint]:
    """Avoidance setpoint, or None when the scan is clear and the mission setpoint stands.

    The step is planar: altitude stays at the current pose, yaw at the goal's.
    """
    if float(scan.ranges.min()) >= config.activation_tolerance:
        return None
    f_att = compute_attractive((pose.x, pose.y), (goal.x, goal.y), config.k_att)
    fx, fy, mag = _ray_terms(scan, pose.heading, config.k_rep, config.d0)
    total = f_att + np.array([fx.sum(), fy.sum()])
    norm = float(np.hypot(*total))
    scale = float(np.hypot(*f_att)) + float(mag.sum())
    if norm <= CANCELLATION_TOL * scale or norm == 0.0:
        return PoseSetpoint(pose.x, pose.y, pose.z, goal.psi)
    ux, uy = total / norm
    return PoseSetpoint(pose.x + config.step * ux, pose.y + config.step * uy, pose.z, goal.psi)


class AvoidanceNode(Node):
    """Overrides the mission setpoint while anything is inside the trigger distance.

    Shares the setpoint topic with guidance.  It remembers the last setpoint
    guidance wrote and restores it once the scan clears.
    """

    stage = Stage.CONTROLLER

    def __init__(self, fcu: FlightController, config: PotentialFieldConfig = PotentialFieldConfig(),
                 rate_hz: float = SENSOR_RATE_HZ, node_id: str = "avoidance", phase: int = 0,
                 scan_topic: str = SCAN_TOPIC, odom_topic: str = ODOM_TOPIC,
                 setpoint_topic: str = SETPOINT_TOPIC):
        self.schedule = NodeSchedule(node_id, rate_hz, phase)
        self.fcu = fcu
        self.config = config
        self.scan_topic = scan_topic
        self.odom_topic = odom_topic
        self.setpoint_topic = setpoint_topic
        self.mission_setpoint: Optional[PoseSetpoint] = None
        self.trigger_ticks: list[int] = []
        self.overriding = False

    def on_tick(self, sim: SimCore, tick: int) -> None:
        box = sim.mailbox(self.setpoint_topic)
        if box.payload is not None and box.writer_id != self.node_id:
            self.mission_setpoint = box.payload
        if self.fcu.mode not in (Mode.TAKING_OFF, Mode.FLYING):
            return
        scan = sim.sample_latest(self.scan_topic)
        odom = sim.sample_latest(self.odom_topic)
        if scan is None or odom is None or self.mission_setpoint is None:
            return
        sp = avoidance_step(scan, odom, self.mission_setpoint, self.config)
        if sp is not None:
            self.trigger_ticks.append(tick)
            sim.publish(self.node_id, self.setpoint_topic, sp)
            self.overriding = True
        elif self.overriding:
            sim.publish(self.node_id, self.setpoint_topic, self.mission_setpoint)
            self.overriding = False
