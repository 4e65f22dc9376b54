"""Scenario loading, execution, checks and reporting."""

from .checks import CHECKS, CheckResult, Verdict, evaluate
from .config import ScenarioConfig, ScenarioLoadError, load_scenario, parse_scenario
from .output import emit_verdict, write_log
from .runner import RunResult, TrajectoryLog, execute, run_scenario

__all__ = ["CHECKS", "CheckResult", "RunResult", "ScenarioConfig", "ScenarioLoadError",
           "TrajectoryLog", "Verdict", "emit_verdict", "evaluate", "execute", "load_scenario",
           "parse_scenario", "run_scenario", "write_log"]
