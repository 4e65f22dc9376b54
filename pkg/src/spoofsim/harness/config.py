"""Scenario file schema, defaults and load-time validation."""

from __future__ import annotations

import inspect
import math
import re
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..attacks import AttackKind, StartTrigger

BUNDLED_DIR = Path(__file__).resolve().parent.parent / "scenarios"


class ScenarioLoadError(Exception):
    """All problems found while loading one scenario file."""

    def __init__(self, source: str, problems: list[tuple[str, str]]):
        self.source = source
        self.problems = problems
        lines = [f"{path or '<root>'}: {msg}" for path, msg in problems]
        super().__init__(f"{source}: invalid scenario\n  " + "\n  ".join(lines))


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ObstacleConfig(_Section):
    center: tuple[float, float]
    radius: float = Field(gt=0)


class GeoOrigin(_Section):
    lat: float = 47.0
    lon: float = 11.0


class WorldConfig(_Section):
    obstacles: list[ObstacleConfig] = []
    geo_origin: GeoOrigin = GeoOrigin()
    scale: float = Field(1e-5, gt=0, description="degrees per meter")


class LidarSection(_Section):
    range_min: float = Field(0.1, ge=0)
    range_max: float = Field(30.0, gt=0)
    mount_offset_deg: float = 0.0
    rate_hz: float = Field(10.0, gt=0)


class GpsSection(_Section):
    rate_hz: float = Field(10.0, gt=0)


class StartPose(_Section):
    x: float = 0.0
    y: float = 0.0
    z: float = Field(0.0, ge=0)
    psi_deg: float = 90.0


class VehicleSection(_Section):
    start: StartPose = StartPose()
    v_max: float = Field(2.0, gt=0)
    omega_max: float = Field(math.pi, gt=0)
    r_vehicle: float = Field(0.3, gt=0)
    takeoff_alt: float = Field(3.0, gt=0)
    takeoff_tolerance: float = Field(0.1, gt=0)


class WaypointConfig(_Section):
    x: float
    y: float
    z: float
    psi: float = 0.0


class MissionSection(_Section):
    start_tick: Optional[int] = Field(0, ge=0)
    rate_hz: float = Field(3.0, gt=0)
    frame_samples: int = Field(100, ge=1)
    pos_tolerance: float = Field(0.3, gt=0)
    heading_tolerance: float = Field(0.01, gt=0)
    waypoints: list[Union[WaypointConfig, tuple[float, float, float, float]]] = []

    def waypoint_list(self) -> list[WaypointConfig]:
        return [w if isinstance(w, WaypointConfig) else WaypointConfig(x=w[0], y=w[1], z=w[2], psi=w[3])
                for w in self.waypoints]


class AvoidanceSection(_Section):
    enabled: bool = True
    k_att: float = Field(1.0, gt=0)
    k_rep: float = Field(1.0, gt=0)
    d0: float = Field(3.0, gt=0)
    activation_tolerance: float = Field(3.0, gt=0)
    step: float = Field(1.0, gt=0)
    rate_hz: float = Field(10.0, gt=0)


class AttackSection(_Section):
    kind: AttackKind
    start_on: StartTrigger = StartTrigger.TICK
    start_tick: Optional[int] = Field(None, ge=0)
    end_tick: Optional[int] = Field(None, ge=1)
    duration_ticks: Optional[int] = Field(None, ge=1)
    rate_hz: float = Field(1000.0, gt=0)
    seed: Optional[int] = None
    # kind-specific
    distance: Optional[float] = None
    bounds: Optional[tuple[float, float]] = None
    d_front: Optional[float] = None
    v_out: Optional[float] = None
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    displacement: Optional[tuple[float, float]] = None
    lat_bounds: Optional[tuple[float, float]] = None
    lon_bounds: Optional[tuple[float, float]] = None

    def params(self) -> dict:
        names = _REQUIRED[self.kind] + _OPTIONAL.get(self.kind, ())
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}


_REQUIRED: dict[AttackKind, tuple[str, ...]] = {
    AttackKind.LIDAR_UNIFORM: ("distance",),
    AttackKind.LIDAR_JAM: ("bounds",),
    AttackKind.LIDAR_FRONT_OBJECT: ("d_front", "v_out"),
    AttackKind.GPS_FIXED_SPOOF: (),
    AttackKind.GPS_JAM: ("lat_bounds", "lon_bounds"),
}
_OPTIONAL = {AttackKind.GPS_FIXED_SPOOF: ("latitude", "longitude", "displacement")}
_ALL_PARAMS = ("distance", "bounds", "d_front", "v_out", "latitude", "longitude",
               "displacement", "lat_bounds", "lon_bounds")


class CheckSpec(BaseModel):
    model_config = ConfigDict(extra="allow")
    name: str

    @property
    def params(self) -> dict:
        return dict(self.model_extra or {})


class ScenarioConfig(_Section):
    id: str
    description: str = ""
    seed: int = 0
    duration_ticks: int = Field(gt=0, le=10_000_000)
    tick_duration: float = Field(0.001, gt=0)
    world: WorldConfig = WorldConfig()
    lidar: LidarSection = LidarSection()
    gps: GpsSection = GpsSection()
    vehicle: VehicleSection = VehicleSection()
    mission: MissionSection = MissionSection()
    avoidance: AvoidanceSection = AvoidanceSection()
    attack: Optional[AttackSection] = None
    checks: list[CheckSpec] = []

    def attack_seed(self) -> int:
        if self.attack is None or self.attack.seed is None:
            return self.seed
        return self.attack.seed


def _semantic_problems(cfg: ScenarioConfig) -> list[tuple[str, str]]:
    from .checks import CHECKS

    out: list[tuple[str, str]] = []
    base_rate = 1.0 / cfg.tick_duration
    lid, av = cfg.lidar, cfg.avoidance
    if not lid.range_min < lid.range_max:
        out.append(("lidar.range_max", "must exceed lidar.range_min"))
    for name, rate in (("lidar.rate_hz", lid.rate_hz), ("gps.rate_hz", cfg.gps.rate_hz),
                       ("mission.rate_hz", cfg.mission.rate_hz), ("avoidance.rate_hz", av.rate_hz)):
        if rate > base_rate:
            out.append((name, f"{rate} Hz exceeds the base tick rate {base_rate:g} Hz"))
    if not av.d0 > lid.range_min:
        out.append(("avoidance.d0", "must exceed lidar.range_min"))
    if av.activation_tolerance > av.d0:
        out.append(("avoidance.activation_tolerance", "must not exceed avoidance.d0"))

    start = cfg.vehicle.start
    for i, ob in enumerate(cfg.world.obstacles):
        if math.hypot(start.x - ob.center[0], start.y - ob.center[1]) < ob.radius + cfg.vehicle.r_vehicle:
            out.append((f"world.obstacles.{i}", "vehicle start position lies inside this obstacle"))

    atk = cfg.attack
    if atk is not None:
        out.extend(_attack_problems(atk, cfg, base_rate))

    if not cfg.checks:
        out.append(("checks", "a scenario must declare at least one check"))
    for i, chk in enumerate(cfg.checks):
        if chk.name not in CHECKS:
            out.append((f"checks.{i}.name", f"unknown check {chk.name!r}"))
            continue
        accepted = list(inspect.signature(CHECKS[chk.name].fn).parameters)[1:]
        for key in chk.params:
            if key not in accepted:
                out.append((f"checks.{i}.{key}", f"check {chk.name!r} takes no parameter {key!r}"))
    return out


def _attack_problems(atk: AttackSection, cfg: ScenarioConfig, base_rate: float):
    out = []
    lid, av = cfg.lidar, cfg.avoidance
    if atk.start_on is StartTrigger.TICK:
        if atk.start_tick is None:
            out.append(("attack.start_tick", "required when start_on is 'tick'"))
        elif atk.end_tick is not None and not atk.start_tick < atk.end_tick:
            out.append(("attack.end_tick", "must be greater than attack.start_tick"))
    else:
        if atk.start_tick is not None:
            out.append(("attack.start_tick", f"not used with start_on {atk.start_on.value!r}"))
        if atk.end_tick is not None:
            out.append(("attack.end_tick", "event-triggered attacks use duration_ticks"))
    if atk.end_tick is not None and atk.duration_ticks is not None:
        out.append(("attack.duration_ticks", "give either end_tick or duration_ticks"))
    if atk.rate_hz > base_rate:
        out.append(("attack.rate_hz", f"exceeds the base tick rate {base_rate:g} Hz"))
    genuine = lid.rate_hz if atk.kind.is_lidar else cfg.gps.rate_hz
    if atk.rate_hz < genuine:
        out.append(("attack.rate_hz", f"below the genuine sensor rate {genuine:g} Hz"))

    for name in _REQUIRED[atk.kind]:
        if getattr(atk, name) is None:
            out.append((f"attack.{name}", f"required for {atk.kind.value}"))
    allowed = set(_REQUIRED[atk.kind]) | set(_OPTIONAL.get(atk.kind, ()))
    for name in _ALL_PARAMS:
        if name not in allowed and getattr(atk, name) is not None:
            out.append((f"attack.{name}", f"not a parameter of {atk.kind.value}"))

    def in_range(path, v):
        if v is not None and not lid.range_min <= v <= lid.range_max:
            out.append((path, f"{v} outside sensor range [{lid.range_min}, {lid.range_max}]"))

    def ordered(path, b):
        if b is not None and not b[0] < b[1]:
            out.append((path, "lower bound must be below upper bound"))

    in_range("attack.distance", atk.distance)
    if atk.bounds is not None:
        in_range("attack.bounds.0", atk.bounds[0])
        in_range("attack.bounds.1", atk.bounds[1])
        ordered("attack.bounds", atk.bounds)
    ordered("attack.lat_bounds", atk.lat_bounds)
    ordered("attack.lon_bounds", atk.lon_bounds)
    if atk.kind is AttackKind.LIDAR_FRONT_OBJECT and atk.d_front is not None and atk.v_out is not None:
        in_range("attack.d_front", atk.d_front)
        in_range("attack.v_out", atk.v_out)
        if not atk.d_front < av.d0:
            out.append(("attack.d_front", f"must be inside the avoidance threshold d0={av.d0}"))
        if not av.d0 <= atk.v_out:
            out.append(("attack.v_out", f"must be outside the avoidance threshold d0={av.d0}"))
    if atk.kind is AttackKind.GPS_FIXED_SPOOF:
        has_abs = atk.latitude is not None or atk.longitude is not None
        if atk.displacement is not None and has_abs:
            out.append(("attack", "give either latitude/longitude or displacement"))
        elif atk.displacement is None and (atk.latitude is None or atk.longitude is None):
            out.append(("attack", "GpsFixedSpoof needs latitude and longitude, or displacement"))
    return out


def parse_scenario(data: dict, source: str = "<dict>") -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioLoadError(source, [("", "top level must be a mapping")])
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        problems = [(".".join(str(p) for p in err["loc"]), err["msg"]) for err in exc.errors()]
        raise ScenarioLoadError(source, problems) from None
    problems = _semantic_problems(cfg)
    if problems:
        raise ScenarioLoadError(source, problems)
    return cfg


def resolve_scenario_path(ref: Union[str, Path]) -> Path:
    """A file path, or the name of a bundled scenario."""
    path = Path(ref)
    if path.exists():
        return path
    name = re.sub(r"^(lidar|gps)_(\d)", r"\1_scenario_\2", str(ref))
    for cand in (BUNDLED_DIR / f"{ref}.yaml", BUNDLED_DIR / str(ref), BUNDLED_DIR / f"{name}.yaml"):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"no scenario file or bundled scenario named {ref!r}")


def load_scenario(ref: Union[str, Path]) -> ScenarioConfig:
    try:
        path = resolve_scenario_path(ref)
        text = path.read_text()
    except OSError as exc:
        raise ScenarioLoadError(str(ref), [("", str(exc))]) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioLoadError(str(path), [("", f"parse error: {exc}")]) from None
    return parse_scenario(data, str(path))


def bundled_scenarios() -> list[Path]:
    return sorted(BUNDLED_DIR.glob("*.yaml"))
