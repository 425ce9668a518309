"""Command-line entry point: ``tdroute gen|check|bound|solve|bench``.

Exit codes: 0 success (``check``: invariant), 1 ``check`` found the graph not
invariant, 2 bad usage, 3 input or runtime error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import ctcp
from .bnb import CSV_HEADER, SolveReport, solve_tdtsp
from .bounds import bound_pair, lower_graph, write_plot_csv
from .instgen import GenSpec, ParseError, format_instance, generate, manifest_row, read_instance, write_instance
from .pwl import FifoError
from .simplex import LpError

EXIT_OK, EXIT_NO, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


def _grid(text: str) -> ctcp.GridPolicy:
    try:
        return ctcp.GridPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _add_lp_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("instance", type=Path)
    p.add_argument("--grid", type=_grid, default=ctcp.GridPolicy("auto"),
                   help="exact, reduced:K or auto (exact while small, else reduced:75)")
    p.add_argument("--rho", type=_positive, default=None, help="rate floor (default 1/narrowest grid step)")
    p.add_argument("--engine", choices=("auto", "simplex", "highs"), default="auto")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tdroute", description="Time-dependent routing bounds and exact TDTSP solver.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--pattern", choices=("A", "B"), default="A")
    g.add_argument("--delta", type=float, default=0.9)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--periods", type=int, default=5)
    g.add_argument("--horizon", type=float, default=None, help="horizon T (default sqrt(n))")
    g.add_argument("--out", type=Path, help="instance path (default: stdout)")

    c = sub.add_parser("check", help="decide constant traversal cost (path ranking invariance)")
    _add_lp_flags(c)

    b = sub.add_parser("bound", help="root lower/upper bounds")
    _add_lp_flags(b)
    b.add_argument("--plot-csv", type=Path, help="write per-arc tau / tau_lower / cost samples")
    b.add_argument("--samples", type=int, default=200)

    s = sub.add_parser("solve", help="exact branch-and-bound")
    _add_lp_flags(s)
    s.add_argument("--time-limit", type=_positive, default=None)
    s.add_argument("--csv", action="store_true", help="print a CSV row instead of key=value lines")
    s.add_argument("--no-timing", action="store_true")

    be = sub.add_parser("bench", help="solve many instances, one CSV row each plus an aggregate")
    be.add_argument("instances", type=Path, nargs="+")
    be.add_argument("--grid", type=_grid, default=ctcp.GridPolicy("auto"))
    be.add_argument("--rho", type=_positive, default=None)
    be.add_argument("--engine", choices=("auto", "simplex", "highs"), default="auto")
    be.add_argument("--time-limit", type=_positive, default=None)
    be.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    be.add_argument("--no-timing", action="store_true")
    return ap


def cmd_gen(args, out) -> int:
    try:
        spec = GenSpec(n=args.n, pattern=args.pattern, delta=args.delta, periods=args.periods,
                       T=args.horizon, seed=args.seed)
    except ValueError as exc:
        print(f"tdroute gen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    g = generate(spec)
    note = (f"pattern={spec.pattern} delta={spec.delta:g} seed={spec.seed} periods={spec.periods}",)
    if args.out is None:
        out.write(format_instance(g, note))
        return EXIT_OK
    write_instance(args.out, g, note)
    row = manifest_row(args.out, spec)
    out.write(",".join(str(v) for v in row.values()) + "\n")
    return EXIT_OK


def cmd_check(args, out) -> int:
    g = read_instance(args.instance)
    res = ctcp.check(g, rho=args.rho, policy=args.grid, engine=args.engine)
    out.write(res.to_text() + "\n")
    return EXIT_OK if res.is_invariant else EXIT_NO


def cmd_bound(args, out) -> int:
    g = read_instance(args.instance)
    res = ctcp.check(g, rho=args.rho, policy=args.grid, engine=args.engine)
    la = lower_graph(g, res)
    bp = bound_pair(g, la)
    gap = (bp.upper - bp.lower) / bp.lower if bp.lower > 0 else float("inf")
    out.write(
        f"lb={bp.lower:.12g}\nub={bp.upper:.12g}\ngap_initial={100 * gap:.6f}\n"
        f"tour={' '.join(map(str, bp.tour))}\nzeta_star={res.zeta_star:.12g}\n"
    )
    if args.plot_csv:
        write_plot_csv(args.plot_csv, g, la, args.samples)
    return EXIT_OK


def _solve_file(path: Path, policy, rho, engine, time_limit) -> SolveReport:
    return solve_tdtsp(read_instance(path), policy=policy, engine=engine, rho=rho, time_limit=time_limit)


def cmd_solve(args, out) -> int:
    rep = _solve_file(args.instance, args.grid, args.rho, args.engine, args.time_limit)
    if args.csv:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerow(rep.csv_row(args.instance.name, timing=not args.no_timing))
    else:
        out.write(rep.to_kv(timing=not args.no_timing) + "\n")
    return EXIT_OK


def aggregate_row(reports: list[SolveReport], timing: bool = True) -> list[str]:
    """Column means; NODES and TIME average over solved instances only."""
    solved = [r for r in reports if r.optimal]
    mean = lambda xs: sum(xs) / len(xs) if xs else float("nan")  # noqa: E731
    return [
        "ALL",
        str(len(solved)),
        f"{mean([r.ratio for r in reports]):.6f}",
        f"{mean([100 * r.gap_initial for r in reports]):.6f}",
        f"{mean([100 * r.gap_final for r in reports]):.6f}",
        f"{mean([r.nodes for r in solved]):.1f}" if solved else "",
        f"{mean([r.seconds for r in solved]):.3f}" if solved and timing else "",
        "",
        "",
    ]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TDROUTE_THREADS", "1")))
    except ValueError:
        return 1


def cmd_bench(args, out) -> int:
    jobs = [(p, args.grid, args.rho, args.engine, args.time_limit) for p in args.instances]
    workers = min(_threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(_solve_file, *zip(*jobs)))
    else:
        reports = [_solve_file(*j) for j in jobs]
    timing = not args.no_timing
    fh = open(args.out, "w", newline="") if args.out else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p, r in zip(args.instances, reports):
            w.writerow(r.csv_row(p.name, timing=timing))
        w.writerow(aggregate_row(reports, timing))
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "check": cmd_check, "bound": cmd_bound, "solve": cmd_solve, "bench": cmd_bench}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (OSError, ParseError, FifoError, LpError, ValueError) as exc:
        print(f"tdroute {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
