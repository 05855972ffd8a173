"""Command-line interface.

Exit codes: 0 success, 1 invalid model or arguments, 2 unstable queue,
3 numerical failure (including a failed ``--selfcheck``).
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional

from . import tables
from .analysis import solve
from .checks import identity_checks
from .config import example, load_spec
from .errors import InvalidModelError, NumericalError, UnstableSystemError
from .simulation import simulate

EXIT_OK, EXIT_INVALID, EXIT_UNSTABLE, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _rows(text: str) -> List[int]:
    """Parse ``"0-5,10,20"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bmapbulk",
                description="Stationary analysis of a BMAP queue with batch-size-dependent "
                            "bulk service under the (a, b) rule.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON model specification")
    src.add_argument("--example", choices=["example1", "example2", "mm1"],
                     help="built-in model instead of a file")
    p.add_argument("--nmax", type=int, help="last queue length to report")
    p.add_argument("--tol", type=float, help="departure-epoch tail mass target")
    p.add_argument("--rows", type=_rows, help="rows to print, e.g. 0-5,10,20")
    p.add_argument("--sim", action="store_true", help="also run the simulation oracle")
    p.add_argument("--seed", type=int, help="simulation master seed")
    p.add_argument("--out", type=Path, help="directory for output files")
    p.add_argument("--format", choices=["text", "csv", "both"], default="text")
    p.add_argument("--precision", type=int, default=6, help="decimal places (default 6)")
    p.add_argument("--epochs", choices=["departure", "arbitrary", "prearrival", "all"],
                   default="all")
    p.add_argument("--selfcheck", action="store_true", help="run the identity checks")
    return p


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = example(args.example) if args.example else load_spec(args.config)
        sol = solve(spec.model, spec.policy,
                    nmax=args.nmax if args.nmax is not None else spec.solver.nmax,
                    tail_tol=args.tol if args.tol is not None else spec.solver.tail_tol,
                    series_method=spec.solver.series_method)
    except InvalidModelError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except UnstableSystemError as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    produced = {}
    if args.epochs in ("departure", "all"):
        produced["departure"] = tables.departure_table(sol, args.rows)
    if args.epochs in ("arbitrary", "all"):
        produced["arbitrary"] = tables.arbitrary_table(sol, args.rows)
    if args.epochs in ("prearrival", "all"):
        produced["prearrival"] = tables.prearrival_table(sol, args.rows)
    if args.sim:
        cfg = spec.sim
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        produced["comparison"] = tables.comparison_table(sol, simulate(spec.model, spec.policy, cfg))

    _emit(produced, args)

    status = EXIT_OK
    if args.selfcheck:
        checks = identity_checks(sol)
        for c in checks:
            print(c.line())
        if not all(c.ok for c in checks):
            status = EXIT_NUMERICAL
    return status


def _emit(produced, args):
    prec = args.precision
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    for name, tab in produced.items():
        if args.format in ("text", "both"):
            text = tab.to_text(prec)
            if args.out is not None:
                (args.out / f"{name}.txt").write_text(text)
            else:
                print(text)
        if args.format in ("csv", "both"):
            data = tab.to_csv(prec)
            if args.out is not None:
                (args.out / f"{name}.csv").write_text(data)
            else:
                print(f"# {name}")
                print(data)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
