"""Benchmark harness: run the factorizations on generated matrices and
report median wall time, throughput, and optional residual checks as CSV.

Timing discipline: the matrix is generated once per bandwidth, every
repetition factors a fresh copy, only the factorization call sits between
the two timer reads, and one untimed warmup run precedes the timed ones.
Throughput normalizes with the exact analytic operation count for every
implementation, so rows are directly comparable.
"""

from __future__ import annotations

import json
import logging
import statistics
import time
from dataclasses import dataclass

import psutil

from .blocked import NativeBackend, NumpyBackend, factor_blocked_serial
from .core import generate_spd, residual_norm
from .errors import BandCholError, InvalidBandwidth, ShapeMismatch
from .flops import flops_exact
from .parallel import ExecPolicy, default_worker_count, factor_blocked_parallel
from .reference import factor_reference
from .taskgraph import select_grid_dim

log = logging.getLogger(__name__)

IMPL_CHOICES = ("reference", "blocked-serial", "blocked-parallel")
BACKEND_CHOICES = ("numpy", "native")
CSV_HEADER = "N,k,n,workers,impl,backend,reps,median_seconds,gflops,residual"
RESIDUAL_LIMIT = 1e-10


@dataclass
class BenchConfig:
    dim: int
    bandwidths: tuple
    impls: tuple = IMPL_CHOICES
    grid_dim: int | None = None
    workers: int | None = None
    repetitions: int = 10
    seed: int = 0
    check: bool = False
    backend: str = "numpy"
    out: str | None = None
    trace: str | None = None


@dataclass
class BenchRecord:
    dim: int
    bandwidth: int
    grid_dim: int | None
    workers: int | None
    impl: str
    backend: str | None
    repetitions: int
    median_seconds: float | None
    gflops: float | None
    residual: float | None

    @property
    def failed(self) -> bool:
        return self.median_seconds is None


def _effective_bandwidth(k: int, wants_blocked: bool) -> int:
    """Apply the harness padding rules; the padded value is what gets reported."""
    eff = k
    if eff % 2:
        eff += 1
        log.info("bandwidth %d is odd; padded to %d", k, eff)
    if wants_blocked and eff < 2:
        eff = 2
        log.info("bandwidth %d too narrow for blocking; padded to 2", k)
    return eff


def _validate(config: BenchConfig) -> list[int]:
    if config.dim < 1:
        raise ShapeMismatch(f"dimension must be positive, got {config.dim}")
    if config.repetitions < 1:
        raise BandCholError(f"repetitions must be positive, got {config.repetitions}")
    if not config.bandwidths:
        raise BandCholError("at least one bandwidth is required")
    if not config.impls:
        raise BandCholError("at least one implementation is required")
    for impl in config.impls:
        if impl not in IMPL_CHOICES:
            raise BandCholError(f"unknown implementation {impl!r}")
    if config.backend not in BACKEND_CHOICES:
        raise BandCholError(f"unknown backend {config.backend!r}")
    if config.workers is not None and config.workers < 1:
        raise BandCholError(f"worker count must be positive, got {config.workers}")
    wants_blocked = any(impl != "reference" for impl in config.impls)
    effective = []
    for k in config.bandwidths:
        if k < 0:
            raise InvalidBandwidth(f"bandwidth must be non-negative, got {k}")
        eff = _effective_bandwidth(k, wants_blocked)
        if eff >= config.dim:
            raise InvalidBandwidth(
                f"bandwidth {k} (padded {eff}) must stay below dimension {config.dim}")
        if wants_blocked and config.grid_dim is not None:
            n = config.grid_dim
            if n < 3:
                raise BandCholError(f"grid dimension {n} < 3")
            if eff % (n - 1):
                raise BandCholError(
                    f"grid dimension {n} does not divide bandwidth {eff}")
        effective.append(eff)
    return effective


def _grid_dim_for(config: BenchConfig, k: int) -> int:
    if config.grid_dim is not None:
        return config.grid_dim
    cores = psutil.cpu_count(logical=False) or 1
    return select_grid_dim(k, cores)


def run_benchmark(config: BenchConfig, *, timer=time.perf_counter) -> list[BenchRecord]:
    """Execute the whole configuration and return one record per (k, impl).

    A failed factorization produces a record with empty timing fields; the
    CLI turns that (and any residual above RESIDUAL_LIMIT when --check is
    on) into a nonzero exit status.
    """
    effective = _validate(config)
    backend_obj = NumpyBackend() if config.backend == "numpy" else NativeBackend()
    records: list[BenchRecord] = []
    trace_rows: list[dict] = []
    for k in effective:
        matrix = generate_spd(config.dim, k, config.seed)
        exact_ops = flops_exact(config.dim, k)
        for impl in config.impls:
            grid = workers = None
            policy = None
            if impl != "reference":
                grid = _grid_dim_for(config, k)
            if impl == "blocked-parallel":
                workers = config.workers if config.workers is not None \
                    else default_worker_count()
                policy = ExecPolicy(worker_count=workers)

            def factor_once(rep: int | None):
                copy = matrix.copy()
                if impl == "reference":
                    return factor_reference(copy).factor
                if impl == "blocked-serial":
                    return factor_blocked_serial(copy, grid, backend=backend_obj)
                run_trace: list | None = [] if (config.trace and rep is not None) else None
                out = factor_blocked_parallel(copy, grid, policy,
                                              backend=backend_obj, trace=run_trace)
                if run_trace:
                    for ev in run_trace:
                        trace_rows.append({"impl": impl, "k": k, "rep": rep,
                                           "kind": ev.kind, "window": ev.window,
                                           "row": ev.row, "col": ev.col,
                                           "start": ev.start, "end": ev.end,
                                           "worker": ev.worker})
                return out

            try:
                factor_once(None)  # warmup, never timed
                times = []
                last = None
                for rep in range(config.repetitions):
                    t0 = timer()
                    last = factor_once(rep)
                    t1 = timer()
                    times.append(t1 - t0)
            except BandCholError as exc:
                log.error("%s failed at N=%d k=%d: %s", impl, config.dim, k, exc)
                records.append(BenchRecord(config.dim, k, grid, workers, impl,
                                           backend_obj.name if impl != "reference" else None,
                                           config.repetitions, None, None, None))
                continue
            median = statistics.median(times)
            gflops = exact_ops / median / 1e9 if median > 0 else float("inf")
            residual = residual_norm(matrix, last) if config.check else None
            records.append(BenchRecord(config.dim, k, grid, workers, impl,
                                       backend_obj.name if impl != "reference" else None,
                                       config.repetitions, median, gflops, residual))
    if config.trace:
        with open(config.trace, "w", encoding="utf-8") as fh:
            for row in trace_rows:
                fh.write(json.dumps(row) + "\n")
    return records


# -- CSV ----------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit_csv(records: list[BenchRecord], path) -> None:
    """Write records as CSV (17 significant digits, UTF-8, newline-terminated).

    Refuses to create a file for an empty record list.
    """
    if not records:
        raise BandCholError("no benchmark records to emit")
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            _fmt(r.dim), _fmt(r.bandwidth), _fmt(r.grid_dim), _fmt(r.workers),
            r.impl, r.backend or "", _fmt(r.repetitions),
            _fmt(r.median_seconds), _fmt(r.gflops), _fmt(r.residual),
        ]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_csv(path) -> list[BenchRecord]:
    """Read back an emit_csv file; empty fields become None."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise BandCholError(f"unrecognized CSV header in {path}")
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 10:
            raise BandCholError(f"malformed CSV row: {line!r}")
        opt_int = lambda s: int(s) if s else None
        opt_float = lambda s: float(s) if s else None
        records.append(BenchRecord(
            dim=int(parts[0]), bandwidth=int(parts[1]),
            grid_dim=opt_int(parts[2]), workers=opt_int(parts[3]),
            impl=parts[4], backend=parts[5] or None, repetitions=int(parts[6]),
            median_seconds=opt_float(parts[7]), gflops=opt_float(parts[8]),
            residual=opt_float(parts[9])))
    return records
