"""CSV trajectory logs and verdict summaries."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import IO, Optional, Union

import yaml

from .checks import Verdict
from .runner import TrajectoryLog


def _cell(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def write_log(log: TrajectoryLog, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(log.columns)
        for row in log.rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_events(log: TrajectoryLog, path: Union[str, Path]) -> Path:
    """Event stream as JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for ev in log.events:
            fh.write(json.dumps({"tick": ev.tick, "source": ev.source, "kind": ev.kind,
                                 "data": ev.data}, default=list) + "\n")
    return path


def verdict_dict(verdict: Verdict) -> dict:
    return {
        "scenario": verdict.scenario_id,
        "passed": verdict.passed,
        "outcome": verdict.outcome,
        "ticks_run": verdict.ticks_run,
        "checks": [asdict(c) for c in verdict.checks],
    }


def emit_verdict(verdict: Verdict, path: Optional[Union[str, Path]] = None,
                 stream: Optional[IO[str]] = None) -> str:
    """Write the YAML summary to ``path`` (if given); echo one line per check to ``stream``."""
    text = yaml.safe_dump(verdict_dict(verdict), sort_keys=False)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    if stream is not None:
        status = "PASS" if verdict.passed else "FAIL"
        stream.write(f"{status} {verdict.scenario_id} ({verdict.outcome}, {verdict.ticks_run} ticks)\n")
        for c in verdict.checks:
            mark = "ok  " if c.passed else "FAIL"
            stream.write(f"  {mark} {c.name}: expected {c.expected}; observed {c.observed}\n")
    return text
