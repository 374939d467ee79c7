"""Command line entry point: ``gcoupling <subcommand> [FILE] [flags]``.

Exit status is 0 when every check in the report passes, 1 when a check
fails and 2 on usage, schema or numeric-cap errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .coupling import BUILTINS
from .experiments import RUNNERS, run_experiment
from .extreal import EvaluationError, GridCapError
from .problem import Numeric, SchemaError, load_problem
from .report import dumps_csv, dumps_json
from .suite import CHECKS, run_suite

__all__ = ["main", "list_builtins"]


def list_builtins() -> str:
    """The coupling catalog, one ``name — description`` line per entry."""
    width = max(len(k) for k in BUILTINS)
    return "\n".join(f"{name:<{width}} — {BUILTINS[name][1]}" for name in BUILTINS) + "\n"


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, help="numeric tolerance (default 1e-6)")
    p.add_argument("--radius", type=float, help="default grid half-width (default 20)")
    p.add_argument("--points", type=int, dest="points_per_dim",
                   help="default grid points per dimension (default 201)")
    p.add_argument("--seed", type=int, help="seed for sampled checks (default 0)")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--timing", action="store_true",
                   help="record wall time (makes the report non-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gcoupling", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment on a problem file")
        p.add_argument("file", type=Path)
        _add_common(p)
    p = sub.add_parser("paper-suite", help="run the closed-form regression suite")
    p.add_argument("--only", action="append", choices=sorted(CHECKS), help="run selected checks")
    _add_common(p)
    sub.add_parser("list-builtins", help="print the coupling catalog")
    return ap


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "list-builtins":
        sys.stdout.write(list_builtins())
        return 0
    overrides = {k: getattr(args, k) for k in ("tol", "radius", "points_per_dim", "seed")}
    t0 = time.perf_counter()
    try:
        if args.cmd == "paper-suite":
            numeric = Numeric(**{k: v for k, v in overrides.items() if v is not None})
            rep = run_suite(numeric.as_dict(), args.only)
        else:
            rep = run_experiment(args.cmd, load_problem(args.file, overrides))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except (GridCapError, EvaluationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.timing:
        rep.wall_time = round(time.perf_counter() - t0, 3)
    if args.format == "csv":
        try:
            text = dumps_csv(rep)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    else:
        text = dumps_json(rep)
    _emit(text, args.out)
    if args.cmd == "paper-suite":
        for name, ok in rep.checks.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}", file=sys.stderr)
    failed = [k for k, v in rep.checks.items() if not v]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
