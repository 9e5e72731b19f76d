"""Benchmark-CSV parsing and figure construction.

Consumes the benchmark harness output purely through its published CSV
schema; no other coupling to the factorization package. Series values are
taken verbatim from the file: no resampling, smoothing, or unit changes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first

EXPECTED_COLUMNS = ("N", "k", "n", "workers", "impl", "backend", "reps",
                    "median_seconds", "gflops", "residual")


class PlotError(Exception):
    """Unusable input: schema mismatch, empty data, bad field values."""


@dataclass
class PlotSpec:
    inputs: tuple
    output: str
    log_y: bool = False
    peak: float | None = None


@dataclass
class SeriesPoint:
    bandwidth: int
    gflops: float


@dataclass
class Series:
    impl: str
    workers: int | None
    points: list = field(default_factory=list)

    @property
    def label(self) -> str:
        if self.workers is None:
            return self.impl
        return f"{self.impl} (workers={self.workers})"


def parse_records(path) -> list[dict]:
    """Read one CSV; dies loudly on any deviation from the published schema."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotError(f"{path} is empty") from None
        if tuple(header) != EXPECTED_COLUMNS:
            for pos, want in enumerate(EXPECTED_COLUMNS):
                got = header[pos] if pos < len(header) else "<missing>"
                if got != want:
                    raise PlotError(
                        f"{path}: unexpected column {got!r} at position {pos}, "
                        f"expected {want!r}")
            raise PlotError(f"{path}: {len(header) - len(EXPECTED_COLUMNS)} "
                            "extra trailing column(s)")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(EXPECTED_COLUMNS):
                raise PlotError(f"{path}:{lineno}: expected "
                                f"{len(EXPECTED_COLUMNS)} fields, got {len(row)}")
            rec = dict(zip(EXPECTED_COLUMNS, row))
            try:
                rec["k"] = int(rec["k"])
                rec["workers"] = int(rec["workers"]) if rec["workers"] else None
                rec["gflops"] = float(rec["gflops"]) if rec["gflops"] else None
            except ValueError as exc:
                raise PlotError(f"{path}:{lineno}: {exc}") from exc
            rows.append(rec)
    if not rows:
        raise PlotError(f"{path} has no data rows")
    return rows


def collect_series(records) -> list[Series]:
    """Group by (impl, workers); x = bandwidth ascending, y = gflops verbatim.

    Rows from failed runs carry no gflops value and are dropped.
    """
    grouped: dict = {}
    for rec in records:
        if rec["gflops"] is None:
            continue
        key = (rec["impl"], rec["workers"])
        grouped.setdefault(key, []).append(
            SeriesPoint(rec["k"], rec["gflops"]))
    out = []
    for (impl, workers), points in sorted(grouped.items(),
                                          key=lambda kv: (kv[0][0], kv[0][1] or 0)):
        points.sort(key=lambda p: p.bandwidth)
        out.append(Series(impl, workers, points))
    if not out:
        raise PlotError("no successful rows to plot")
    return out


def build_figure(spec: PlotSpec):
    """Return (figure, axes) with one line per series; caller saves/closes."""
    records = []
    for path in spec.inputs:
        records.extend(parse_records(path))
    series = collect_series(records)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for s in series:
        ax.plot([p.bandwidth for p in s.points],
                [p.gflops for p in s.points],
                marker="o", label=s.label)
    if spec.peak is not None:
        ax.axhline(spec.peak, color="black", linestyle="--", linewidth=1.0,
                   label=f"peak {spec.peak:g} GFLOP/s")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("bandwidth k")
    ax.set_ylabel("GFLOP/s")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig, ax


def plot_gflops(spec: PlotSpec) -> str:
    """Build and write the figure; returns the output path."""
    fig, _ = build_figure(spec)
    kwargs = {}
    if str(spec.output).lower().endswith(".png"):
        # strip the writer's version stamp so equal inputs give equal bytes
        kwargs["metadata"] = {"Software": None}
    try:
        fig.savefig(spec.output, dpi=120, **kwargs)
    finally:
        plt.close(fig)
    return spec.output
