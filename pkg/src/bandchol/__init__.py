"""Banded Cholesky factorization with packed storage, a blocked
sliding-window engine, and a dependency-driven parallel executor.
"""

from .bench import BenchConfig, BenchRecord, emit_csv, parse_csv, run_benchmark
from .blocked import (Cell, KernelBackend, NativeBackend, NumpyBackend,
                      TaskKind, TraceEvent, WindowDesc, WindowPlan, WorkArray,
                      cell_view, factor_blocked_serial, plan_windows)
from .core import (BandedMatrix, generate_spd, index_map, load_matrix,
                   pad_bandwidth, residual_norm, save_matrix,
                   solve_with_factor)
from .errors import (BandCholError, BandwidthNotDivisible, CountOverflow,
                     GridTooSmall, InvalidBandwidth, NotPositiveDefinite,
                     OutOfBand, ShapeMismatch, SingularFactor)
from .flops import flops_approx, flops_exact
from .parallel import (ExecPolicy, TaskTrace, default_worker_count,
                       factor_blocked_parallel)
from .reference import FactorResult, count_flops_instrumented, factor_reference
from .taskgraph import (BlockTask, DepCell, TaskGraph, build_task_graph,
                        select_grid_dim)

__version__ = "0.1.0"

__all__ = [
    "BandedMatrix", "BandCholError", "BandwidthNotDivisible", "BenchConfig",
    "BenchRecord", "BlockTask", "Cell", "CountOverflow", "DepCell",
    "ExecPolicy", "FactorResult", "GridTooSmall", "InvalidBandwidth",
    "KernelBackend", "NativeBackend", "NotPositiveDefinite", "NumpyBackend",
    "OutOfBand", "ShapeMismatch", "SingularFactor", "TaskGraph", "TaskKind",
    "TaskTrace", "TraceEvent", "WindowDesc", "WindowPlan", "WorkArray",
    "build_task_graph", "cell_view", "count_flops_instrumented", "emit_csv",
    "factor_blocked_parallel", "factor_blocked_serial", "factor_reference",
    "flops_approx", "flops_exact", "generate_spd", "index_map", "load_matrix",
    "pad_bandwidth", "parse_csv", "plan_windows", "residual_norm",
    "run_benchmark", "save_matrix", "select_grid_dim", "solve_with_factor",
    "default_worker_count",
]
