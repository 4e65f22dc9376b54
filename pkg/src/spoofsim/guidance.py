"""Waypoint guidance in the style of a GNC companion-computer API.

Everything here reads the vehicle pose from the local odometry topic, so a
spoofed topic propagates straight into the destination arithmetic and the
waypoint-reached test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from statistics import fmean
from typing import Optional, Sequence

from .bus import Node, NodeSchedule, SimCore, Stage
from .errors import GuidanceError, InitializationError
from .messages import OdometryMsg, PoseSetpoint
from .sensors import ODOM_TOPIC
from .vehicle import Command, FlightController, Mode

DEG2RAD = math.pi / 180.0
SETPOINT_TOPIC = "/mavros/setpoint_position/local"


@dataclass(frozen=True)
class LocalFrame:
    local_offset_g: float  # degrees
    local_offset_pose_g: tuple[float, float, float] = (0.0, 0.0, 0.0)
    correction_heading_g: float = 0.0  # degrees
    correction_vector_g: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def rotation(self) -> float:
        """Map-to-local rotation angle in radians."""
        return (self.correction_heading_g + self.local_offset_g - 90.0) * DEG2RAD


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    z: float
    psi: float = 0.0  # degrees


class MissionPhase(Enum):
    WAITING_START = "WaitingStart"
    INITIALIZING_FRAME = "InitializingFrame"
    TAKING_OFF = "TakingOff"
    EN_ROUTE = "EnRoute"
    HOVERING = "Hovering"
    LANDING = "Landing"
    DONE = "Done"


@dataclass
class MissionState:
    waypoints: list[Waypoint]
    current_index: int = 0
    phase: MissionPhase = MissionPhase.WAITING_START
    reach_ticks: list[int] = field(default_factory=list)
    outcome: Optional[str] = None


def initialize_local_frame(samples: Sequence[OdometryMsg]) -> LocalFrame:
    if not samples:
        raise InitializationError("no odometry samples on the local position topic")
    return LocalFrame(
        local_offset_g=fmean(math.degrees(s.heading) for s in samples),
        local_offset_pose_g=(
            fmean(s.x for s in samples),
            fmean(s.y for s in samples),
            fmean(s.z for s in samples),
        ),
    )


def rotate_to_local(x: float, y: float, frame: LocalFrame) -> tuple[float, float]:
    heading = frame.rotation
    return (x * math.cos(heading) - y * math.sin(heading),
            x * math.sin(heading) + y * math.cos(heading))


def set_destination(
    x: float,
    y: float,
    z: float,
    psi: float,
    frame: Optional[LocalFrame],
    current_local_pose: Sequence[float],
    true_anchor: Sequence[float],
) -> PoseSetpoint:
    """Build the position setpoint for map waypoint ``(x, y, z, psi)``.

    The waypoint is rotated into the local frame, the pose read from the
    odometry topic (plus correction) is subtracted, and that difference is
    added to ``true_anchor``, the autopilot's own position at command time.
    With genuine odometry the anchor and the sampled pose coincide and the
    setpoint is simply the rotated waypoint.
    """
    if frame is None:
        raise GuidanceError("set_destination before the local frame was initialized")
    x_local, y_local = rotate_to_local(x, y, frame)
    local = (x_local, y_local, z)
    cv = frame.correction_vector_g
    target = [
        true_anchor[i] + (local[i] - (current_local_pose[i] + cv[i])) + cv[i] for i in range(3)
    ]
    yaw = (psi + frame.correction_heading_g + frame.local_offset_g) * DEG2RAD
    return PoseSetpoint(target[0], target[1], target[2], yaw)


def heading_error(current_deg: float, desired_deg: float) -> float:
    cos_err = math.cos(current_deg * DEG2RAD) - math.cos(desired_deg * DEG2RAD)
    sin_err = math.sin(current_deg * DEG2RAD) - math.sin(desired_deg * DEG2RAD)
    return math.sqrt(cos_err**2 + sin_err**2)


def waypoint_errors(target: Sequence[float], pose: Sequence[float],
                    current_heading_deg: float, desired_heading_deg: float) -> tuple[float, float]:
    dx = abs(target[0] - pose[0])
    dy = abs(target[1] - pose[1])
    dz = abs(target[2] - pose[2])
    d_mag = math.sqrt(dx**2 + dy**2 + dz**2)
    return d_mag, heading_error(current_heading_deg, desired_heading_deg)


def check_waypoint_reached(target: Sequence[float], pose: Sequence[float],
                           current_heading_deg: float, desired_heading_deg: float,
                           pos_tolerance: float = 0.3, heading_tolerance: float = 0.01) -> bool:
    d_mag, h_err = waypoint_errors(target, pose, current_heading_deg, desired_heading_deg)
    return d_mag < pos_tolerance and h_err < heading_tolerance


class GuidanceNode(Node):
    """Mission loop: start, frame init, takeoff, waypoints, land.

    One action per poll.  After takeoff completes the first destination is
    issued on the following poll.
    """

    stage = Stage.CONTROLLER

    def __init__(
        self,
        fcu: FlightController,
        waypoints: Sequence[Waypoint],
        *,
        rate_hz: float = 3.0,
        start_tick: Optional[int] = 0,
        takeoff_alt: float = 3.0,
        frame_samples: int = 100,
        pos_tolerance: float = 0.3,
        heading_tolerance: float = 0.01,
        odom_topic: str = ODOM_TOPIC,
        setpoint_topic: str = SETPOINT_TOPIC,
        node_id: str = "gnc",
        phase: int = 0,
    ):
        self.schedule = NodeSchedule(node_id, rate_hz, phase)
        self.fcu = fcu
        self.mission = MissionState(list(waypoints))
        self.start_tick = start_tick
        self.takeoff_alt = takeoff_alt
        self.frame_samples = frame_samples
        self.pos_tolerance = pos_tolerance
        self.heading_tolerance = heading_tolerance
        self.odom_topic = odom_topic
        self.setpoint_topic = setpoint_topic
        self.frame: Optional[LocalFrame] = None
        self.waypoint_g: Optional[PoseSetpoint] = None
        self.desired_heading: float = 0.0  # local frame, degrees
        self._samples: list[OdometryMsg] = []
        self._sim: Optional[SimCore] = None
        self._commanded = False

    @property
    def phase(self) -> MissionPhase:
        return self.mission.phase

    # -- API functions ---------------------------------------------------

    def wait4start(self, tick: int) -> bool:
        if self.start_tick is None or tick < self.start_tick:
            return False
        if self.fcu.command(Command.GUIDED):
            self._emit("start")
            return True
        return False

    def current_pose(self) -> Optional[OdometryMsg]:
        return self._sim.sample_latest(self.odom_topic)

    def current_heading(self, odom: OdometryMsg) -> float:
        """Heading in the local frame, degrees."""
        return math.degrees(odom.heading) - self.frame.local_offset_g

    def takeoff(self, alt: float) -> PoseSetpoint:
        if not alt > 0:
            raise GuidanceError(f"invalid takeoff altitude {alt}")
        if self.fcu.mode is not Mode.GUIDED:
            raise GuidanceError(f"takeoff rejected in mode {self.fcu.mode.value}")
        odom = self.current_pose()
        if odom is None:
            raise GuidanceError("takeoff without odometry")
        sp = PoseSetpoint(odom.x, odom.y, alt, odom.heading)
        self._sim.publish(self.node_id, self.setpoint_topic, sp)
        self.fcu.command(Command.TAKEOFF, altitude=alt)
        self.waypoint_g = sp
        self.desired_heading = self.current_heading(odom) if self.frame else 0.0
        self._emit("takeoff", altitude=alt)
        return sp

    def land(self) -> None:
        if not self.fcu.state.airborne:
            raise GuidanceError("land while not airborne")
        self.fcu.command(Command.LAND)
        self._emit("land")

    def goto(self, wp: Waypoint) -> PoseSetpoint:
        odom = self.current_pose()
        if odom is None:
            raise GuidanceError("no odometry for set_destination")
        sp = set_destination(wp.x, wp.y, wp.z, wp.psi, self.frame, odom.position,
                             self.fcu.local_position())
        self._sim.publish(self.node_id, self.setpoint_topic, sp)
        self.waypoint_g = sp
        self.desired_heading = wp.psi
        self._emit("destination", index=self.mission.current_index, setpoint=sp.target)
        return sp

    def waypoint_reached(self) -> bool:
        odom = self.current_pose()
        if odom is None or self.waypoint_g is None:
            return False
        return check_waypoint_reached(
            self.waypoint_g.target, odom.position, self.current_heading(odom),
            self.desired_heading, self.pos_tolerance, self.heading_tolerance)

    # -- loop ---------------------------------------------------------------

    def on_tick(self, sim: SimCore, tick: int) -> None:
        self._sim = sim
        m = self.mission
        if m.outcome is not None:
            return
        if self.fcu.mode is Mode.CRASHED:
            m.outcome = "crashed"
            self._emit("aborted", reason="crash")
            return

        if m.phase is MissionPhase.WAITING_START:
            if self.wait4start(tick):
                m.phase = MissionPhase.INITIALIZING_FRAME
        elif m.phase is MissionPhase.INITIALIZING_FRAME:
            odom = self.current_pose()
            if odom is None:
                m.outcome = "aborted"
                self._emit("aborted", reason="odometry topic absent")
                return
            self._samples.append(odom)
            if len(self._samples) >= self.frame_samples:
                self.frame = initialize_local_frame(self._samples)
                self._emit("frame_initialized", local_offset_g=self.frame.local_offset_g)
                self.takeoff(self.takeoff_alt)
                m.phase = MissionPhase.TAKING_OFF
        elif m.phase is MissionPhase.TAKING_OFF:
            if self.waypoint_reached():
                self._emit("takeoff_complete")
                m.phase = MissionPhase.EN_ROUTE
        elif m.phase is MissionPhase.EN_ROUTE:
            if self._commanded:
                if not self.waypoint_reached():
                    return
                m.reach_ticks.append(tick)
                self._emit("reach", index=m.current_index)
                m.current_index += 1
            if m.current_index < len(m.waypoints):
                self.goto(m.waypoints[m.current_index])
                self._commanded = True
            else:
                self.land()
                m.phase = MissionPhase.LANDING
        elif m.phase is MissionPhase.LANDING:
            if self.fcu.mode is Mode.LANDED:
                m.phase = MissionPhase.DONE
                m.outcome = "completed"
                self._emit("done")

    def finalize(self) -> str:
        """Label how the mission ended once the run stops."""
        m = self.mission
        if self.fcu.mode is Mode.CRASHED:
            m.outcome = "crashed"
        elif m.outcome is None:
            moving = any(abs(v) > 0.0 for v in self.fcu.state.velocity)
            if m.phase is MissionPhase.EN_ROUTE and self.fcu.state.airborne and not moving:
                m.phase = MissionPhase.HOVERING
                m.outcome = "hovering"
            else:
                m.outcome = "in_progress"
        return m.outcome

    def _emit(self, kind: str, **data) -> None:
        if self._sim is not None:
            self._sim.emit(self.node_id, kind, **data)
