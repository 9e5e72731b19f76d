"""Command line: turn benchmark CSVs into a GFLOP/s-versus-bandwidth figure."""

from __future__ import annotations

import argparse
import sys

from .plotting import PlotError, PlotSpec, plot_gflops


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bandchol-plot",
        description="Plot benchmark CSVs as GFLOP/s versus bandwidth.")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="benchmark CSV file(s)")
    p.add_argument("--out", required=True, metavar="IMAGE",
                   help="output image path (png recommended)")
    p.add_argument("--log-y", action="store_true",
                   help="logarithmic y axis")
    p.add_argument("--peak", type=float, default=None, metavar="GFLOPS",
                   help="draw a horizontal peak-throughput reference line")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(inputs=tuple(args.inputs), output=args.out,
                    log_y=args.log_y, peak=args.peak)
    try:
        plot_gflops(spec)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())
