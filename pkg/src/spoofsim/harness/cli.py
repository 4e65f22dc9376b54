"""Command line entry point: ``spoofsim run`` and ``spoofsim run-all``."""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .checks import list_checks
from .config import ScenarioLoadError, bundled_scenarios, load_scenario
from .output import emit_verdict, write_events, write_log
from .runner import run_scenario

EXIT_OK, EXIT_CHECK_FAILED, EXIT_LOAD_ERROR, EXIT_INTERNAL = 0, 1, 2, 3


def _run_one(ref: str, seed: Optional[int], out: Optional[str], log_every: int):
    """Worker body; returns ``(exit_code, report_text)``."""
    import io

    buf = io.StringIO()
    try:
        cfg = load_scenario(ref)
    except ScenarioLoadError as exc:
        return EXIT_LOAD_ERROR, f"ERROR {exc}\n"
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    try:
        log, verdict = run_scenario(cfg, log_every)
    except Exception:  # noqa: BLE001 - reported as an internal error
        return EXIT_INTERNAL, f"INTERNAL ERROR in {cfg.id}\n{traceback.format_exc()}"
    summary = None
    try:
        if out is not None:
            outdir = Path(out)
            write_log(log, outdir / f"{cfg.id}.csv")
            write_events(log, outdir / f"{cfg.id}.events.jsonl")
            summary = outdir / f"{cfg.id}.verdict.yaml"
        emit_verdict(verdict, summary, buf)
    except OSError as exc:
        return EXIT_INTERNAL, f"I/O ERROR writing results for {cfg.id}: {exc}\n"
    return (EXIT_OK if verdict.passed else EXIT_CHECK_FAILED), buf.getvalue()


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spoofsim", description="Sensor-spoofing attack simulator")
    p.add_argument("--list-checks", action="store_true", help="list available checks and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd")

    def common(sp):
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--out", help="directory for CSV logs, events and verdicts")
        sp.add_argument("--log-every", type=int, default=1, metavar="N",
                        help="keep every N-th tick in the CSV log (default 1)")

    run = sub.add_parser("run", help="run one scenario file or bundled scenario name")
    run.add_argument("scenario")
    common(run)
    run_all = sub.add_parser("run-all", help="run every *.yaml scenario in a directory")
    run_all.add_argument("directory", nargs="?", help="defaults to the bundled scenarios")
    run_all.add_argument("-j", "--jobs", type=int, default=None, help="worker processes")
    common(run_all)
    sub.add_parser("list", help="list bundled scenarios")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.list_checks:
        for name, desc in list_checks():
            print(f"{name:32s} {desc}")
        return EXIT_OK
    if args.cmd == "list":
        for path in bundled_scenarios():
            print(path.stem)
        return EXIT_OK
    if args.cmd is None:
        _parser().print_help()
        return EXIT_LOAD_ERROR
    if args.log_every < 1:
        print("ERROR --log-every must be >= 1", file=sys.stderr)
        return EXIT_LOAD_ERROR

    if args.cmd == "run":
        code, text = _run_one(args.scenario, args.seed, args.out, args.log_every)
        (sys.stderr if code in (EXIT_LOAD_ERROR, EXIT_INTERNAL) else sys.stdout).write(text)
        return code

    if args.directory is None:
        files = bundled_scenarios()
    else:
        d = Path(args.directory)
        if not d.is_dir():
            print(f"ERROR {d} is not a directory", file=sys.stderr)
            return EXIT_LOAD_ERROR
        files = sorted(d.glob("*.yaml"))
    if not files:
        print("ERROR no scenario files found", file=sys.stderr)
        return EXIT_LOAD_ERROR
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_run_one, str(f), args.seed, args.out, args.log_every) for f in files]
        results = [f.result() for f in futures]
    for code, text in results:
        sys.stdout.write(text)
    codes = [c for c, _ in results]
    n_pass = codes.count(EXIT_OK)
    print(f"{n_pass}/{len(codes)} scenarios passed")
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
