"""Command-line front end for the benchmark harness.

Exit status: 0 on success, 1 when any run failed or a requested residual
check exceeded the limit, 2 for unusable arguments.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import (BACKEND_CHOICES, IMPL_CHOICES, RESIDUAL_LIMIT, BenchConfig,
                    emit_csv, run_benchmark)
from .errors import BandCholError

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bandchol-bench",
        description="Benchmark banded Cholesky factorizations.")
    p.add_argument("--dim", type=int, required=True, metavar="N",
                   help="matrix dimension")
    p.add_argument("--bandwidths", nargs="+", required=True, metavar="K",
                   help="bandwidths, comma or space separated; one run each")
    p.add_argument("--impls", nargs="+", default=list(IMPL_CHOICES),
                   help="implementations to time (default: all)")
    p.add_argument("--grid-dim", type=int, default=None, metavar="n",
                   help="blocks per window side (default: pick per bandwidth)")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel worker threads (default: physical cores)")
    p.add_argument("--reps", type=int, default=10,
                   help="timed repetitions per run (default: 10)")
    p.add_argument("--seed", type=int, default=0,
                   help="matrix generator seed (default: 0)")
    p.add_argument("--check", action="store_true",
                   help="verify each factor and record the residual")
    p.add_argument("--backend", choices=BACKEND_CHOICES, default="numpy",
                   help="block kernel backend (default: numpy)")
    p.add_argument("--out", default=None, metavar="FILE",
                   help="write results as CSV")
    p.add_argument("--trace", default=None, metavar="FILE",
                   help="write parallel task traces as JSON lines")
    return p


def _split_list(tokens):
    return [part for tok in tokens for part in tok.split(",") if part]


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        bandwidths = tuple(int(tok) for tok in _split_list(args.bandwidths))
    except ValueError:
        parser.error(f"--bandwidths must be integers, got {args.bandwidths!r}")
    impls = tuple(_split_list(args.impls))
    for impl in impls:
        if impl not in IMPL_CHOICES:
            parser.error(f"--impls must be drawn from {', '.join(IMPL_CHOICES)}")
    config = BenchConfig(
        dim=args.dim, bandwidths=bandwidths, impls=impls,
        grid_dim=args.grid_dim, workers=args.workers, repetitions=args.reps,
        seed=args.seed, check=args.check, backend=args.backend,
        out=args.out, trace=args.trace)
    try:
        records = run_benchmark(config)
    except BandCholError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status = 0
    for r in records:
        if r.failed:
            print(f"N={r.dim} k={r.bandwidth} {r.impl}: FAILED", file=sys.stderr)
            status = 1
            continue
        line = (f"N={r.dim} k={r.bandwidth} impl={r.impl} "
                f"median={r.median_seconds:.6f}s gflops={r.gflops:.3f}")
        if r.residual is not None:
            line += f" residual={r.residual:.3e}"
            if not r.residual <= RESIDUAL_LIMIT:
                line += " (CHECK FAILED)"
                status = 1
        print(line)
    if args.out:
        try:
            emit_csv(records, args.out)
        except BandCholError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    return status


def entry() -> None:
    sys.exit(main())
