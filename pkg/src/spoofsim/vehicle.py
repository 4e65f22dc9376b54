"""Ground-truth world, quadcopter kinematics and the flight-mode machine.

The flight controller here tracks position setpoints using the true vehicle
state.  It plays the part of the autopilot and its internal estimator, which
keeps working while only the companion-computer topics are spoofed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .bus import Node, NodeSchedule, SimCore, Stage
from .errors import ModeViolation
from .messages import PoseSetpoint


@dataclass(frozen=True)
class Obstacle:
    """Infinite vertical cylinder with a circular footprint."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"obstacle radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class World:
    obstacles: tuple[Obstacle, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def with_obstacle(self, obstacle: Obstacle) -> "World":
        return World(self.obstacles + (obstacle,))

    @property
    def centers(self) -> np.ndarray:
        return np.array([o.center for o in self.obstacles], dtype=float).reshape(-1, 2)

    @property
    def radii(self) -> np.ndarray:
        return np.array([o.radius for o in self.obstacles], dtype=float)


class Mode(Enum):
    IDLE = "Idle"
    GUIDED = "Guided"
    TAKING_OFF = "TakingOff"
    FLYING = "Flying"
    LANDING = "Landing"
    LANDED = "Landed"
    CRASHED = "Crashed"


class Command(Enum):
    GUIDED = "guided"
    TAKEOFF = "takeoff"
    REACH_ALTITUDE = "reach_altitude"
    LAND = "land"
    TOUCHDOWN = "touchdown"
    CRASH = "crash"


_TRANSITIONS = {
    (Mode.IDLE, Command.GUIDED): Mode.GUIDED,
    (Mode.GUIDED, Command.TAKEOFF): Mode.TAKING_OFF,
    (Mode.TAKING_OFF, Command.REACH_ALTITUDE): Mode.FLYING,
    (Mode.FLYING, Command.LAND): Mode.LANDING,
    (Mode.LANDING, Command.TOUCHDOWN): Mode.LANDED,
    (Mode.TAKING_OFF, Command.CRASH): Mode.CRASHED,
    (Mode.FLYING, Command.CRASH): Mode.CRASHED,
    (Mode.LANDING, Command.CRASH): Mode.CRASHED,
}
ABSORBING = frozenset({Mode.CRASHED, Mode.LANDED})
AIRBORNE = frozenset({Mode.TAKING_OFF, Mode.FLYING, Mode.LANDING})


@dataclass(frozen=True)
class VehicleState:
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    psi: float = 0.0
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mode: Mode = Mode.IDLE

    @property
    def airborne(self) -> bool:
        return self.mode in AIRBORNE


@dataclass(frozen=True)
class VehicleParams:
    v_max: float = 2.0
    omega_max: float = math.pi
    r_vehicle: float = 0.3
    takeoff_tolerance: float = 0.1


def wrap_angle(a: float) -> float:
    """Map to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def set_mode(state: VehicleState, command: Command) -> VehicleState:
    if state.mode in ABSORBING:
        return state
    new_mode = _TRANSITIONS.get((state.mode, command))
    if new_mode is None:
        raise ModeViolation(f"{command.value} not allowed in mode {state.mode.value}")
    if new_mode is Mode.CRASHED:
        return replace(state, mode=new_mode, velocity=(0.0, 0.0, 0.0))
    return replace(state, mode=new_mode)


def step_dynamics(
    state: VehicleState,
    setpoint: PoseSetpoint,
    dt: float,
    params: VehicleParams = VehicleParams(),
) -> VehicleState:
    """One first-order tracking step toward ``setpoint``.

    Moves straight at ``min(v_max, distance / dt)`` and slews yaw by at most
    ``omega_max * dt``.  A landing vehicle that reaches the ground is clamped
    at ``z = 0`` and switches to ``Landed``.
    """
    if state.mode not in AIRBORNE:
        return replace(state, velocity=(0.0, 0.0, 0.0))

    x, y, z = state.position
    dx, dy, dz = setpoint.x - x, setpoint.y - y, setpoint.z - z
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    max_step = params.v_max * dt
    if dist <= max_step:
        nx, ny, nz = setpoint.x, setpoint.y, setpoint.z
    else:
        s = max_step / dist
        nx, ny, nz = x + dx * s, y + dy * s, z + dz * s

    mode = state.mode
    if nz <= 0.0 and (mode is Mode.LANDING or nz < 0.0):
        nz = 0.0
        if mode is Mode.LANDING:
            mode = Mode.LANDED

    err = wrap_angle(setpoint.psi - state.psi)
    max_turn = params.omega_max * dt
    if abs(err) <= max_turn:
        psi = setpoint.psi
    else:
        psi = wrap_angle(state.psi + math.copysign(max_turn, err))

    velocity = ((nx - x) / dt, (ny - y) / dt, (nz - z) / dt)
    if mode is Mode.LANDED:
        velocity = (0.0, 0.0, 0.0)
    return VehicleState((nx, ny, nz), psi, velocity, mode)


def check_collision(state: VehicleState, world: World, r_vehicle: float = 0.3) -> bool:
    x, y = state.position[0], state.position[1]
    for ob in world.obstacles:
        if math.hypot(x - ob.center[0], y - ob.center[1]) < ob.radius + r_vehicle:
            return True
    return False


class FlightController(Node):
    """Autopilot stand-in: consumes setpoints from the bus, integrates truth."""

    stage = Stage.PHYSICS

    def __init__(
        self,
        state: VehicleState,
        world: World,
        params: VehicleParams = VehicleParams(),
        setpoint_topic: str = "/mavros/setpoint_position/local",
        rate_hz: float = 1000.0,
        node_id: str = "fcu",
    ):
        self.schedule = NodeSchedule(node_id, rate_hz)
        self.state = state
        self.world = world
        self.params = params
        self.setpoint_topic = setpoint_topic
        self.takeoff_alt: Optional[float] = None
        self._land_setpoint: Optional[PoseSetpoint] = None
        self._sim: Optional[SimCore] = None
        self.dt = 1.0 / rate_hz

    @property
    def mode(self) -> Mode:
        return self.state.mode

    def local_position(self) -> tuple[float, float, float]:
        """The autopilot's own position estimate (ground truth here)."""
        return self.state.position

    def attach(self, sim: SimCore) -> None:
        self._sim = sim
        self.dt = sim.clock.tick_duration * self.schedule.period(sim.clock.base_rate)

    def command(self, command: Command, altitude: Optional[float] = None) -> bool:
        try:
            new = set_mode(self.state, command)
        except ModeViolation as exc:
            if self._sim is not None:
                self._sim.emit(self.node_id, "mode_violation", command=command.value,
                               mode=self.state.mode.value, error=str(exc))
            return False
        if command is Command.TAKEOFF:
            self.takeoff_alt = altitude
        elif command is Command.LAND and new.mode is Mode.LANDING:
            x, y, _ = new.position
            self._land_setpoint = PoseSetpoint(x, y, 0.0, new.psi)
        changed = new.mode is not self.state.mode
        self.state = new
        if changed and self._sim is not None:
            self._sim.emit(self.node_id, "mode", mode=new.mode.value)
        return True

    def active_setpoint(self, sim: SimCore) -> Optional[PoseSetpoint]:
        if self.state.mode is Mode.LANDING:
            return self._land_setpoint
        if self.state.mode in (Mode.TAKING_OFF, Mode.FLYING):
            return sim.sample_latest(self.setpoint_topic)
        return None

    def on_tick(self, sim: SimCore, tick: int) -> None:
        sp = self.active_setpoint(sim)
        if sp is None:
            return
        before = self.state.mode
        new = step_dynamics(self.state, sp, self.dt, self.params)
        self.state = new
        if new.mode is not before:
            sim.emit(self.node_id, "mode", mode=new.mode.value)
        if (
            new.mode is Mode.TAKING_OFF
            and self.takeoff_alt is not None
            and abs(new.position[2] - self.takeoff_alt) < self.params.takeoff_tolerance
        ):
            self.command(Command.REACH_ALTITUDE)
        if self.state.airborne and check_collision(self.state, self.world, self.params.r_vehicle):
            sim.emit(self.node_id, "collision", position=self.state.position)
            self.command(Command.CRASH)
