"""Dependency graph over the blocked window steps.

The same physical b-by-b block reappears in consecutive windows one cell up
and to the left: DepCell(t, i, j) and DepCell(t+1, i-1, j-1) name the same
storage.  Edges are derived per-task from declared reads and writes with
last-writer bookkeeping keyed by physical block coordinates, which yields
exactly the read-after-write, write-after-write, and write-after-read
orderings a sequentially consistent in-place execution needs.  Task order
in the list is the serial engine's program order, and is a valid
topological order of the graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .blocked import TaskKind, WindowPlan, window_program
from .errors import BandwidthNotDivisible, InvalidBandwidth

_TARGET_BLOCK = 50  # preferred block edge for the grid heuristic


@dataclass(frozen=True)
class DepCell:
    """A window-relative cell coordinate: window t, cell (row, col)."""
    window: int
    row: int
    col: int

    def physical(self) -> tuple[int, int]:
        """Global (block-row, block-col) identity, shared across windows."""
        return (self.window + self.row, self.window + self.col)


@dataclass(frozen=True)
class BlockTask:
    kind: TaskKind
    cell: DepCell
    reads: tuple
    writes: DepCell


@dataclass
class TaskGraph:
    plan: WindowPlan
    tasks: list
    preds: list
    succs: list

    @property
    def edge_count(self) -> int:
        return sum(len(p) for p in self.preds)


def select_grid_dim(bandwidth: int, cores: int) -> int:
    """Pick the window grid dimension for a machine with `cores` cores.

    Candidates are n with (n-1) dividing the bandwidth and
    3 <= n <= max(3, cores); the winner minimizes |k/(n-1) - 50|, ties
    going to the larger n.  Odd bandwidths cannot form the minimum 3x3
    grid and are rejected outright; pad to an even bandwidth first.
    """
    if cores < 1:
        raise InvalidBandwidth(f"core count must be positive, got {cores}")
    if bandwidth < 2:
        raise InvalidBandwidth(f"grid selection needs bandwidth >= 2, got {bandwidth}")
    if bandwidth % 2:
        raise BandwidthNotDivisible(
            f"bandwidth {bandwidth} is odd; pad to {bandwidth + 1} to enable blocking")
    best = None
    best_key = None
    for n in range(3, max(3, cores) + 1):
        if bandwidth % (n - 1):
            continue
        key = (abs(Fraction(bandwidth, n - 1) - _TARGET_BLOCK), -n)
        if best_key is None or key < best_key:
            best, best_key = n, key
    # 2 divides every even bandwidth, so n = 3 is always a candidate
    assert best is not None
    return best


def _read_cells(plan: WindowPlan, t: int, kind: TaskKind, i: int, j: int) -> tuple:
    """Declared read set of one step, including the previous-window alias of
    the cell it is about to overwrite (vacuous in window 0)."""
    n = plan.grid_dim
    reads = []
    if kind is TaskKind.FACTOR_DIAG:
        if t > 0:
            reads.append(DepCell(t - 1, 1, 1))
    elif kind is TaskKind.SOLVE_PANEL:
        reads.append(DepCell(t, 0, 0))
        if i == n - 1:
            reads.append(DepCell(t, n - 1, 0))  # staged content from copy_in
        elif t > 0:
            reads.append(DepCell(t - 1, i + 1, 1))
    elif kind is TaskKind.UPDATE_GENERAL:
        reads.append(DepCell(t, i, 0))
        reads.append(DepCell(t, j, 0))
        if i < n - 1 and t > 0:
            reads.append(DepCell(t - 1, i + 1, j + 1))
    elif kind is TaskKind.UPDATE_SYMMETRIC:
        reads.append(DepCell(t, i, 0))
        if i < n - 1 and t > 0:
            reads.append(DepCell(t - 1, i + 1, i + 1))
    elif kind is TaskKind.COPY_BACK:
        reads.append(DepCell(t, n - 1, 0))
    # COPY_IN reads untouched matrix content only
    return tuple(reads)


def build_task_graph(plan: WindowPlan) -> TaskGraph:
    """Emit BlockTasks in program order and derive dependency edges.

    Every writer of a physical block is ordered after the block's previous
    writer and previous readers, and every reader after the last writer, so
    all conflicting accesses are ordered and a sequential execution of the
    list reproduces the serial engine exactly.
    """
    tasks: list[BlockTask] = []
    preds: list[set] = []
    last_writer: dict = {}
    readers_since: dict = {}
    for w in plan.windows:
        for kind, i, j in window_program(w, plan.grid_dim):
            t = w.index
            cell = DepCell(t, i, j)
            reads = _read_cells(plan, t, kind, i, j)
            idx = len(tasks)
            dep = set()
            for rc in reads:
                owner = last_writer.get(rc.physical())
                if owner is not None:
                    dep.add(owner)
            phys = cell.physical()
            owner = last_writer.get(phys)
            if owner is not None:
                dep.add(owner)
            dep.update(readers_since.get(phys, ()))
            dep.discard(idx)
            tasks.append(BlockTask(kind, cell, reads, cell))
            preds.append(dep)
            last_writer[phys] = idx
            readers_since[phys] = []
            for rc in reads:
                rp = rc.physical()
                if rp != phys:
                    readers_since.setdefault(rp, []).append(idx)
    succs: list[list] = [[] for _ in tasks]
    for idx, dep in enumerate(preds):
        for p in dep:
            succs[p].append(idx)
    return TaskGraph(plan, tasks, [tuple(sorted(d)) for d in preds],
                     [tuple(sorted(s)) for s in succs])
