"""Named post-run checks that turn a run into a verdict."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..bus import WriterClass
from ..vehicle import Mode
from .runner import MODES, RunResult

GENUINE_RETURN_TICKS = 100


@dataclass(frozen=True)
class CheckResult:
    name: str
    expected: str
    observed: str
    passed: bool


@dataclass
class Verdict:
    scenario_id: str
    outcome: str
    ticks_run: int
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def result(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class CheckDef:
    name: str
    description: str
    fn: Callable[..., tuple[str, str, bool]]


CHECKS: dict[str, CheckDef] = {}


def check(name: str, description: str):
    def deco(fn):
        CHECKS[name] = CheckDef(name, description, fn)
        return fn
    return deco


def _window(r: RunResult) -> tuple[int, int]:
    """Trace indices ``[lo, hi)`` covering the attack window."""
    if r.attack_window is None:
        raise LookupError("attack never started")
    start, end = r.attack_window
    lo = r.trace.index_of(start)
    hi = len(r.trace) if end is None else r.trace.index_of(end)
    return lo, hi


def _no_attack() -> tuple[str, str, bool]:
    return "attack active", "attack never started", False


@check("all_waypoints_reached", "every waypoint produced a reach event")
def all_waypoints_reached(r: RunResult):
    n = len(r.config.mission.waypoints)
    return f"{n} reach events", f"{len(r.reach_ticks)} reach events", len(r.reach_ticks) == n


@check("landed", "the vehicle ends the run in Landed")
def landed(r: RunResult):
    return "mode Landed", f"mode {r.final_state.mode.value}", r.final_state.mode is Mode.LANDED


@check("no_collision", "no collision event was recorded")
def no_collision(r: RunResult):
    n = len(r.events_of("collision"))
    return "0 collisions", f"{n} collisions", n == 0


@check("collision_occurred", "a collision with an obstacle was recorded")
def collision_occurred(r: RunResult):
    hits = r.events_of("collision")
    obs = f"collision at tick {hits[0].tick}" if hits else "no collision"
    return "collision", obs, bool(hits)


@check("avoidance_silent_during_attack", "avoidance never triggered inside the attack window")
def avoidance_silent_during_attack(r: RunResult):
    if r.attack_window is None:
        return _no_attack()
    start, end = r.attack_window
    inside = [t for t in r.avoidance_ticks if t >= start and (end is None or t < end)]
    return "0 triggers", f"{len(inside)} triggers", not inside


@check("control_run_no_collision", "the same scenario without the attack does not collide")
def control_run_no_collision(r: RunResult):
    from .runner import execute

    ctrl = execute(r.config, log_every=10**9, with_attack=False)
    n = len(ctrl.events_of("collision"))
    return "0 collisions without attack", f"{n} collisions without attack", n == 0


@check("no_reach_after_attack_start", "no waypoint or takeoff-altitude reach after the attack began")
def no_reach_after_attack_start(r: RunResult, within_window: bool = False):
    if r.attack_window is None:
        return _no_attack()
    start, end = r.attack_window
    stop = end if within_window and end is not None else math.inf
    late = [e for e in r.events
            if start <= e.tick < stop and e.kind in ("reach", "takeoff_complete")]
    where = "inside the window" if math.isfinite(stop) else "after attack start"
    return f"0 reach events {where}", f"{len(late)} reach events {where}", not late


@check("bounded_near_attack_start", "true position stays within a radius of its attack-start value")
def bounded_near_attack_start(r: RunResult, radius: float = 10.0):
    if r.attack_window is None:
        return _no_attack()
    lo, _ = _window(r)
    pos = r.trace.true_pos
    dev = float(np.max(np.linalg.norm(pos[lo:] - pos[lo], axis=1)))
    return f"max deviation < {radius} m", f"max deviation {dev:.3f} m", dev < radius


@check("retreat_along_heading", "displacement window_s after attack start points against the attack-start heading")
def retreat_along_heading(r: RunResult, window_s: float = 2.0):
    if r.attack_window is None:
        return _no_attack()
    lo, _ = _window(r)
    tr = r.trace
    hi = min(len(tr) - 1, tr.index_of(int(tr.tick[lo]) + round(window_s / r.config.tick_duration)))
    psi = tr.true_psi[lo]
    d = tr.true_pos[hi, :2] - tr.true_pos[lo, :2]
    along = float(d[0] * math.cos(psi) + d[1] * math.sin(psi))
    return f"component < 0 after {window_s} s", f"component {along:.3f} m", along < 0.0


@check("waypoint_physically_reached", "true position came within tolerance of a commanded setpoint")
def waypoint_physically_reached(r: RunResult, index: int = 0):
    sp = r.destinations.get(index)
    if sp is None:
        return f"waypoint {index} commanded", "never commanded", False
    tol = r.config.mission.pos_tolerance
    dist = float(np.min(np.linalg.norm(r.trace.true_pos - np.asarray(sp), axis=1)))
    return f"min distance < {tol} m", f"min distance {dist:.4f} m", dist < tol


@check("never_landing", "the vehicle never entered Landing")
def never_landing(r: RunResult):
    n = int(np.count_nonzero(r.trace.mode == MODES.index(Mode.LANDING)))
    return "0 ticks in Landing", f"{n} ticks in Landing", n == 0


@check("final_hovering", "the mission ends hovering, waiting on a reach that never comes")
def final_hovering(r: RunResult):
    return "outcome hovering", f"outcome {r.outcome}", r.outcome == "hovering"


@check("x_displacement_negative", "true x moves in the negative direction across the attack window")
def x_displacement_negative(r: RunResult):
    if r.attack_window is None:
        return _no_attack()
    lo, hi = _window(r)
    x = r.trace.true_pos[:, 0]
    dx = float(x[max(lo, hi - 1)] - x[lo])
    return "dx < 0", f"dx {dx:.3f} m", dx < 0.0


@check("attacker_dominance", "targeted topics hold attacker payloads on every tick of the window")
def attacker_dominance(r: RunResult):
    if r.attack_window is None:
        return _no_attack()
    lo, hi = _window(r)
    tr = r.trace
    problems = []
    for topic, w in tr.writers.items():
        bad = int(np.count_nonzero(w[lo:hi] != int(WriterClass.ATTACKER)))
        if bad:
            problems.append(f"{topic}: {bad} non-attacker ticks")
        if r.attack_window[1] is not None and hi < len(tr):
            # after the window a genuine payload must show up again
            later = w[hi:hi + GENUINE_RETURN_TICKS + 1] == int(WriterClass.GENUINE)
            if not later.any() and len(tr) - hi > GENUINE_RETURN_TICKS:
                problems.append(f"{topic}: no genuine payload within {GENUINE_RETURN_TICKS} ticks after the window")
    obs = "; ".join(problems) or f"{hi - lo} ticks dominated"
    return "attacker holds every targeted topic", obs, not problems


@check("odometry_consistent", "odometry equals the true pose at every genuine GPS tick")
def odometry_consistent(r: RunResult, tol: float = 1e-9):
    tr = r.trace
    period = max(1, round(1.0 / (r.config.tick_duration * r.config.gps.rate_hz)))
    mask = (tr.tick % period == 0) & ~tr.attack_active
    if r.config.attack is not None and not r.config.attack.kind.is_lidar and r.attack_window is not None:
        mask &= tr.tick < r.attack_window[0]
    err = float(np.max(np.abs(tr.odo[mask] - tr.true_pos[mask]))) if mask.any() else 0.0
    return f"max error <= {tol}", f"max error {err:.3g}", err <= tol


def evaluate(result: RunResult) -> "Verdict":
    verdict = Verdict(result.config.id, result.outcome, result.ticks_run)
    for spec in result.config.checks:
        cdef = CHECKS[spec.name]
        expected, observed, ok = cdef.fn(result, **spec.params)
        verdict.checks.append(CheckResult(spec.name, expected, observed, bool(ok)))
    return verdict


def list_checks() -> list[tuple[str, str]]:
    return [(c.name, c.description) for c in CHECKS.values()]
