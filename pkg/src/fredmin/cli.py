"""Command-line front end.

    fredmin solve problem.prob [--report text|json] [--samples N]
            [--oracle M] [--compare-legacy] [--quad-order K] [--panels P]
            [--out FILE] [--seed S]

Exit codes: 0 on a successful solve (least-squares mode included, with a
warning in the report), 2 on validation errors. Validation failures print a
single line `CODE: message` to stderr; the codes are documented in the
README.
"""

from __future__ import annotations

import argparse
import sys

from .errors import FredminError
from .pipeline import solve_problem
from .problem import parse_problem_file
from .report import render_json, render_text


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fredmin",
        description="minimal-norm solver for first-kind Fredholm equations "
                    "with separable kernels")
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="solve a problem file")
    solve.add_argument("file", help="problem file path")
    solve.add_argument("--report", choices=("text", "json"), default="text")
    solve.add_argument("--samples", type=int, default=None,
                       help="solution table samples per axis (default 101)")
    solve.add_argument("--oracle", type=int, default=None, metavar="M",
                       help="run the dense pseudo-inverse oracle with m=M")
    solve.add_argument("--compare-legacy", action="store_true", default=None,
                       help="also compute the legacy g-basis solution")
    solve.add_argument("--quad-order", type=int, default=None, metavar="K")
    solve.add_argument("--panels", type=int, default=None, metavar="P")
    solve.add_argument("--out", default=None, metavar="FILE",
                       help="write the report to FILE instead of stdout")
    solve.add_argument("--seed", type=int, default=None, metavar="S",
                       help="seed for the randomized self-checks; the core "
                            "solve path is deterministic regardless")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "samples": args.samples,
        "oracle_m": args.oracle,
        "compare_legacy": args.compare_legacy,
        "quad_order": args.quad_order,
        "panels": args.panels,
        "seed": args.seed,
    }
    try:
        problem = parse_problem_file(args.file)
        report = solve_problem(problem, overrides)
    except FredminError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
        return 2
    rendered = (render_json(report) if args.report == "json"
                else render_text(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(rendered)
    else:
        sys.stdout.write(rendered)
    return 0


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
