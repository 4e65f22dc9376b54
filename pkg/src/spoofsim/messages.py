"""Message payloads exchanged over the simulation bus."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_RAYS = 1024
# clockwise-positive sweep over the full circle
ANGLE_INCREMENT = -2.0 * math.pi / N_RAYS


@dataclass(frozen=True, eq=False)
class LaserScan:
    """Planar 360 degree scan.

    Ray ``i`` points at body angle ``angle_min + i * angle_increment``; with the
    default ``angle_min = 0`` ray 0 lies along the vehicle heading and indices
    grow clockwise.  A ray without a hit reads ``range_max``.
    """

    ranges: np.ndarray
    range_min: float = 0.1
    range_max: float = 30.0
    angle_min: float = 0.0
    angle_increment: float = ANGLE_INCREMENT

    def __post_init__(self):
        ranges = np.array(self.ranges, dtype=float)
        if ranges.shape != (N_RAYS,):
            raise ValueError(f"LaserScan needs exactly {N_RAYS} ranges, got shape {ranges.shape}")
        ranges.setflags(write=False)
        object.__setattr__(self, "ranges", ranges)

    def ray_angles(self) -> np.ndarray:
        return self.angle_min + np.arange(N_RAYS) * self.angle_increment

    def same_as(self, other: "LaserScan") -> bool:
        return (
            np.array_equal(self.ranges, other.ranges)
            and (self.range_min, self.range_max, self.angle_min, self.angle_increment)
            == (other.range_min, other.range_max, other.angle_min, other.angle_increment)
        )


def _coerce(obj) -> None:
    # keep payloads as plain floats so logs never see numpy scalar reprs
    for name in obj.__dataclass_fields__:
        object.__setattr__(obj, name, float(getattr(obj, name)))


@dataclass(frozen=True)
class NavSatFixMsg:
    latitude: float
    longitude: float

    def __post_init__(self):
        _coerce(self)


@dataclass(frozen=True)
class OdometryMsg:
    """Local-frame pose; ``heading`` in radians."""

    x: float
    y: float
    z: float
    heading: float

    def __post_init__(self):
        _coerce(self)

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class PoseSetpoint:
    """Position target for the flight controller; ``psi`` is the yaw target in radians."""

    x: float
    y: float
    z: float
    psi: float

    def __post_init__(self):
        _coerce(self)
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z, self.psi)):
            raise ValueError(f"non-finite setpoint {self!r}")

    @property
    def target(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)
