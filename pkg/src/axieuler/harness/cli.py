"""Command line: ``axieuler {run, check, diag, dump}``.

Exit codes
----------
0  success
1  a verification gate failed (``check``)
2  configuration or usage error (including an unknown check suite)
3  numerical failure during a run (partial record kept, marked incomplete)
4  run finished but was flagged as under-resolved
5  unreadable input file (snapshot or run record)

With ``--json-errors`` failures are also printed to stdout as one JSON
object ``{"error": kind, "message": ..., "exit_code": n}``.

Set ``AXIEULER_THREADS`` to bound the number of worker threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_UNDER_RESOLVED = 4
EXIT_IO = 5

__all__ = ["main", "EXIT_OK", "EXIT_CHECK_FAILED", "EXIT_CONFIG", "EXIT_NUMERICAL",
           "EXIT_UNDER_RESOLVED", "EXIT_IO"]


class _Fail(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Fail(EXIT_CONFIG, "usage", f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="axieuler", description="Axisymmetric Euler flow in the unit ball.")
    p.add_argument("--json-errors", action="store_true",
                   help="also print failures as a JSON object on stdout")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("run", help="run a configured simulation")
    r.add_argument("--config", required=True, help="TOML config file")
    r.add_argument("--out", help="output directory (overrides output.directory)")
    r.add_argument("--dry-run", action="store_true",
                   help="validate and print the resolved config; write nothing")
    r.add_argument("--json-errors", action="store_true", default=argparse.SUPPRESS)

    c = sub.add_parser("check", help="run a verification suite")
    c.add_argument("suite", help="specfun | kernels | velocity | transport | lemma41 | kato")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--json-errors", action="store_true", default=argparse.SUPPRESS)

    d = sub.add_parser("diag", help="regenerate diagnostics and reports of a run directory")
    d.add_argument("run_dir")
    d.add_argument("--json-errors", action="store_true", default=argparse.SUPPRESS)

    u = sub.add_parser("dump", help="write a snapshot as CSV (one row per node)")
    u.add_argument("snapshot")
    u.add_argument("--out", help="CSV path (default: stdout)")
    u.add_argument("--json-errors", action="store_true", default=argparse.SUPPRESS)
    return p


def _cmd_run(args) -> int:
    from ..scenario import ScenarioError
    from .config import ConfigError, load_config
    from .runner import RunFailure, initial_field, run_config

    try:
        cfg = load_config(args.config)
        if args.out:
            cfg = cfg.with_overrides(output={"directory": args.out})
        if args.dry_run:
            initial_field(cfg)
            print(cfg.to_json())
            return EXIT_OK
        record = run_config(cfg)
    except (ConfigError, ScenarioError) as exc:
        raise _Fail(EXIT_CONFIG, "config", str(exc)) from exc
    except RunFailure as exc:
        raise _Fail(EXIT_NUMERICAL, "numerical",
                    f"{exc} (partial record in {exc.record.directory})") from exc
    print(f"run record: {record.directory} (status {record.status})")
    if record.manifest["flags"]:
        for flag in record.manifest["flags"]:
            print(f"warning: {flag}", file=sys.stderr)
        raise _Fail(EXIT_UNDER_RESOLVED, "under_resolved", "; ".join(record.manifest["flags"]))
    return EXIT_OK


def _cmd_check(args) -> int:
    from .checks import SUITES, run_suite
    from .io import json_ready

    if args.suite not in SUITES:
        raise _Fail(EXIT_CONFIG, "unknown_suite",
                    f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    rep = run_suite(args.suite, args.seed)
    print(json.dumps(json_ready(rep), indent=2, sort_keys=True))
    return EXIT_OK if rep["passed"] else EXIT_CHECK_FAILED


def _cmd_diag(args) -> int:
    from .io import SnapshotError
    from .postprocess import regenerate
    from .record import RunRecord

    try:
        record = RunRecord.load(args.run_dir)
        regenerate(record)
    except (OSError, SnapshotError, ValueError, KeyError) as exc:
        raise _Fail(EXIT_IO, "io", str(exc)) from exc
    print(f"regenerated diagnostics in {record.directory}")
    for rel in [record.manifest["diagnostics_csv"], *record.manifest["reports"]]:
        print(f"  {rel}")
    return EXIT_OK


def _cmd_dump(args) -> int:
    from .io import SnapshotError, read_snapshot, snapshot_to_csv

    try:
        snap = read_snapshot(args.snapshot)
    except (OSError, SnapshotError) as exc:
        raise _Fail(EXIT_IO, type(exc).__name__, str(exc)) from exc
    if args.out:
        with open(Path(args.out), "w", newline="") as fh:
            snapshot_to_csv(snap, fh)
    else:
        snapshot_to_csv(snap, sys.stdout)
    return EXIT_OK


def main(argv=None) -> int:
    """Entry point; returns the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    json_errors = "--json-errors" in argv
    try:
        from ..biot_savart import set_thread_count_from_env

        set_thread_count_from_env()
        args = _parser().parse_args(argv)
        if args.command is None:
            raise _Fail(EXIT_CONFIG, "usage", "axieuler: a subcommand is required "
                        "(run, check, diag, dump)")
        handler = {"run": _cmd_run, "check": _cmd_check, "diag": _cmd_diag,
                   "dump": _cmd_dump}[args.command]
        return handler(args)
    except BrokenPipeError:
        # output piped into a closed reader (e.g. head): not an error
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        if json_errors:
            print(json.dumps({"error": exc.kind, "message": str(exc), "exit_code": exc.code}))
        return exc.code
