"""Thread-pool execution of the blocked factorization task graph.

Tasks run the same block kernels as the serial engine (the heavy ones
release the GIL inside BLAS), so with the per-block total order enforced by
the graph the parallel result is byte-identical to the serial one for any
worker count.  On failure the pool quiesces: running tasks finish, queued
tasks never start, and the first failure in program order is re-raised.
"""

from __future__ import annotations

import heapq
import os
import random
import threading
import time
from dataclasses import dataclass

import psutil
from threadpoolctl import threadpool_limits

from .blocked import (KernelBackend, NumpyBackend, TaskKind, plan_windows,
                      run_block_op)
from .core import BandedMatrix
from .errors import BandCholError
from .taskgraph import TaskGraph, build_task_graph

WORKERS_ENV = "BANDCHOL_WORKERS"


def default_worker_count() -> int:
    """Worker count from the environment, falling back to physical cores."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        count = int(env)
        if count < 1:
            raise BandCholError(f"{WORKERS_ENV} must be positive, got {count}")
        return count
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


@dataclass
class ExecPolicy:
    """Execution knobs for the parallel engine.

    worker_count of None resolves through BANDCHOL_WORKERS, then physical
    cores.  jitter_seed injects a random sub-millisecond sleep before each
    task; it exists to shake out scheduling-order assumptions in tests.
    """
    worker_count: int | None = None
    jitter_seed: int | None = None


@dataclass
class TaskTrace:
    kind: str
    window: int
    row: int
    col: int
    start: float
    end: float
    worker: int


class _Pool:
    """Dependency-driven worker pool over a fixed task list."""

    def __init__(self, graph: TaskGraph, execute, workers: int,
                 jitter_seed: int | None, trace: list | None):
        self.graph = graph
        self.execute = execute
        self.workers = workers
        self.jitter_seed = jitter_seed
        self.trace = trace
        self.cv = threading.Condition()
        self.indeg = [len(p) for p in graph.preds]
        self.ready = [i for i, d in enumerate(self.indeg) if d == 0]
        heapq.heapify(self.ready)
        self.unfinished = len(graph.tasks)
        self.failures: list[tuple[int, BaseException]] = []

    def _worker(self, wid: int) -> None:
        jitter = (random.Random(self.jitter_seed * 7919 + wid)
                  if self.jitter_seed is not None else None)
        while True:
            with self.cv:
                while not self.ready and self.unfinished > 0 and not self.failures:
                    self.cv.wait()
                if self.failures or not self.ready:
                    return
                idx = heapq.heappop(self.ready)
            if jitter is not None:
                time.sleep(jitter.random() * 2e-4)
            start = time.perf_counter()
            try:
                self.execute(idx)
            except BaseException as exc:
                with self.cv:
                    self.failures.append((idx, exc))
                    self.unfinished -= 1
                    self.cv.notify_all()
                return
            end = time.perf_counter()
            with self.cv:
                if self.trace is not None:
                    task = self.graph.tasks[idx]
                    self.trace.append(TaskTrace(task.kind.value, task.cell.window,
                                                task.cell.row, task.cell.col,
                                                start, end, wid))
                self.unfinished -= 1
                for succ in self.graph.succs[idx]:
                    self.indeg[succ] -= 1
                    if self.indeg[succ] == 0:
                        heapq.heappush(self.ready, succ)
                self.cv.notify_all()

    def run(self) -> None:
        threads = [threading.Thread(target=self._worker, args=(wid,), daemon=True)
                   for wid in range(self.workers)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        if self.failures:
            raise min(self.failures, key=lambda f: f[0])[1]
        if self.unfinished:
            raise BandCholError("task graph did not drain; dependency cycle?")


def factor_blocked_parallel(matrix: BandedMatrix, grid_dim: int,
                            policy: ExecPolicy | None = None, *,
                            backend: KernelBackend | None = None,
                            trace: list | None = None,
                            check_invariants: bool = False) -> BandedMatrix:
    """Task-parallel blocked factorization; overwrites `matrix` with L.

    Produces byte-identical results to factor_blocked_serial for every
    worker count.  Pass a list as `trace` to collect one timestamped
    TaskTrace per task (the debug dump the CLI serializes).
    """
    if policy is None:
        policy = ExecPolicy()
    if backend is None:
        backend = NumpyBackend()
    workers = policy.worker_count if policy.worker_count is not None \
        else default_worker_count()
    if workers < 1:
        raise BandCholError(f"worker count must be positive, got {workers}")
    plan = plan_windows(matrix.dim, matrix.bandwidth, grid_dim)
    graph = build_task_graph(plan)
    work_slots: list = [None] * len(plan.windows)

    def execute(idx: int) -> None:
        task = graph.tasks[idx]
        t = task.cell.window
        result = run_block_op(matrix, plan.windows[t], plan.grid_dim, task.kind,
                              task.cell.row, task.cell.col, backend,
                              work_slots[t], check_invariants)
        if task.kind is TaskKind.COPY_IN:
            work_slots[t] = result
        elif task.kind is TaskKind.COPY_BACK:
            work_slots[t] = None  # staging buffer retired

    with threadpool_limits(limits=1, user_api="blas"):
        _Pool(graph, execute, workers, policy.jitter_seed, trace).run()
    return matrix
