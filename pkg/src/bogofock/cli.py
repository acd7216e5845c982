"""Command-line front end.

Exit codes: 0 when every check passes (skipped checks do not count as
failures), 1 when any check fails, 2 for configuration errors (unreadable
scenario, invalid JSON, schema violations, bad arguments).
"""

from __future__ import annotations

import argparse
import os
import sys
from contextlib import nullcontext

from . import __version__
from .scenario import COMMAND_CHECKS, ScenarioError, emit, load_scenario, run_scenario

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

HELP = {
    "check": "run the checks listed in the scenario",
    "vacuum": "build the Bogoliubov vacuum and verify it is annihilated",
    "implement": "verify the implementer's intertwining relations and injectivity",
    "diagonalize": "diagonalize the scenario's quadratic Hamiltonian",
    "probe": "probe the trace condition tr(v* v) over growing mode counts",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bogofock", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ["check", *COMMAND_CHECKS]:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--scenario", required=True, help="path to a scenario JSON file")
        p.add_argument("--format", choices=("json", "table"), default="table")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--timings", action="store_true", help="record wall times (breaks byte determinism)")
    return parser


def _thread_limit():
    raw = os.environ.get("BOGOFOCK_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ScenarioError(f"BOGOFOCK_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ScenarioError(f"BOGOFOCK_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        scn = load_scenario(args.scenario)
        with _thread_limit():
            report = run_scenario(scn, args.command, timings=args.timings)
    except ScenarioError as exc:
        print(f"bogofock: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    data = emit(report, args.format)
    if args.out:
        try:
            with open(args.out, "wb") as fh:
                fh.write(data)
        except OSError as exc:
            print(f"bogofock: cannot write report: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_PASS if report.passed else EXIT_FAIL
