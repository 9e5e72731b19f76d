"""Blocked banded Cholesky over a sliding n-by-n window of b-by-b cells.

With b = k/(n-1) the window placed at offset t*b covers the whole active
band.  One window step factors the leading diagonal cell, solves the panel
cells below it, and applies the rank-b updates to the trailing cells; the
window then slides down by one block row/column, so cell (i, j) of window
t is the same storage as cell (i-1, j-1) of window t+1.

Every cell except the bottom-left one is a dense rectangle of in-band
elements and can be addressed directly inside the packed storage as a
strided 2-D view (element strides (1, lead_dim-1)).  The bottom-left cell
straddles the band edge: only its upper triangle is stored, so it is
staged through a square zero-filled work array for the panel solve and the
bottom-row updates, and its triangle is copied back afterwards.

Block kernels are pluggable: the native backend is a plain triple-loop
implementation meant to be auditable, the numpy backend maps the same four
operations onto BLAS/LAPACK calls.  The backend is passed in at call time,
never global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy.linalg import LinAlgError, solve_triangular
from scipy.linalg.lapack import dpotrf
from threadpoolctl import threadpool_limits

from .core import BandedMatrix
from .errors import (BandCholError, BandwidthNotDivisible, GridTooSmall,
                     InvalidBandwidth, NotPositiveDefinite, SingularFactor)


class TaskKind(Enum):
    FACTOR_DIAG = "factor_diag"
    SOLVE_PANEL = "solve_panel"
    UPDATE_GENERAL = "update_general"
    UPDATE_SYMMETRIC = "update_symmetric"
    COPY_IN = "copy_in"
    COPY_BACK = "copy_back"


# -- window geometry ----------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    """Global index extents of one window cell, clamped to the matrix."""
    row_start: int
    row_stop: int
    col_start: int
    col_stop: int
    trapezoid: bool = False

    @property
    def row_count(self) -> int:
        return self.row_stop - self.row_start

    @property
    def col_count(self) -> int:
        return self.col_stop - self.col_start


@dataclass(frozen=True)
class WindowDesc:
    index: int
    start: int
    cells: dict = field(compare=False)


@dataclass(frozen=True)
class WindowPlan:
    dim: int
    bandwidth: int
    grid_dim: int
    block_size: int
    windows: tuple


def plan_windows(dim: int, bandwidth: int, grid_dim: int) -> WindowPlan:
    """Lay out the sliding windows for an n-by-n cell grid.

    Requires grid_dim >= 3, 2 <= bandwidth < dim, and (grid_dim - 1)
    dividing the bandwidth.  Returns ceil(dim / b) windows; window t starts
    at row t*b and cells that fall entirely past the matrix edge are absent.
    """
    if grid_dim < 3:
        raise GridTooSmall(f"grid dimension {grid_dim} < 3")
    if bandwidth < 2 or bandwidth >= dim:
        raise InvalidBandwidth(
            f"blocked factorization needs 2 <= bandwidth < dim, got k={bandwidth}, N={dim}")
    if bandwidth % (grid_dim - 1):
        raise BandwidthNotDivisible(
            f"bandwidth {bandwidth} not divisible by grid_dim-1 = {grid_dim - 1}")
    b = bandwidth // (grid_dim - 1)
    count = -(-dim // b)
    windows = []
    for t in range(count):
        start = t * b
        cells: dict = {}
        for i in range(grid_dim):
            r0 = start + i * b
            if r0 >= dim:
                break
            r1 = min(r0 + b, dim)
            for j in range(i + 1):
                c0 = start + j * b
                c1 = min(c0 + b, dim)
                cells[(i, j)] = Cell(r0, r1, c0, c1,
                                     trapezoid=(i == grid_dim - 1 and j == 0))
        windows.append(WindowDesc(t, start, cells))
    return WindowPlan(dim, bandwidth, grid_dim, b, tuple(windows))


def cell_view(matrix: BandedMatrix, cell: Cell) -> np.ndarray:
    """Dense 2-D view of a fully in-band cell inside the packed storage.

    Element (p, q) sits at flat offset base + p + q*(lead_dim - 1).  For
    diagonal cells the strict upper triangle of the view aliases other
    columns' storage; kernels must not touch it.  Never valid for the
    trapezoid cell, which is staged through a WorkArray instead.
    """
    ldab = matrix.lead_dim
    rows, cols = cell.row_count, cell.col_count
    base = cell.col_start * ldab + (cell.row_start - cell.col_start)
    length = (rows - 1) + (cols - 1) * (ldab - 1) + 1
    item = matrix.data.itemsize
    return as_strided(matrix.data[base: base + length], shape=(rows, cols),
                      strides=(item, (ldab - 1) * item))


class WorkArray:
    """Zero-filled staging buffer for the bottom-left window cell.

    Only the in-band part of that cell (local p <= q) is real data; the
    strict lower triangle of the buffer is exactly zero and stays zero
    through the panel solve, so the bottom-row updates can treat the buffer
    as an ordinary dense operand.
    """

    __slots__ = ("buffer",)

    def __init__(self, rows: int, cols: int):
        self.buffer = np.zeros((rows, cols))

    @classmethod
    def load(cls, matrix: BandedMatrix, cell: Cell) -> "WorkArray":
        w = cls(cell.row_count, cell.col_count)
        panel = matrix.panel
        for q in range(cell.col_count):
            col = cell.col_start + q
            cnt = min(cell.row_count, q + 1)
            d0 = cell.row_start - col
            w.buffer[:cnt, q] = panel[d0: d0 + cnt, col]
        return w

    def store(self, matrix: BandedMatrix, cell: Cell) -> None:
        panel = matrix.panel
        for q in range(cell.col_count):
            col = cell.col_start + q
            cnt = min(cell.row_count, q + 1)
            d0 = cell.row_start - col
            panel[d0: d0 + cnt, col] = self.buffer[:cnt, q]


# -- block kernels -------------------------------------------------------------

class KernelBackend:
    """Interface for the four block kernels.

    Diagonal-block operations (factor_diag, update_symmetric targets) read
    and write the lower triangle only.  Implementations must be
    deterministic: identical operands give bit-identical results.
    """

    name = "?"

    def factor_diag(self, block: np.ndarray) -> None:
        """In-place Cholesky of a diagonal block; lower triangle only."""
        raise NotImplementedError

    def solve_panel(self, panel: np.ndarray, factor: np.ndarray) -> None:
        """panel <- panel * factor^-T for a lower-triangular factor."""
        raise NotImplementedError

    def update_general(self, target: np.ndarray, left: np.ndarray,
                       right: np.ndarray) -> None:
        """target -= left @ right.T"""
        raise NotImplementedError

    def update_symmetric(self, target: np.ndarray, panel: np.ndarray) -> None:
        """Lower triangle of target -= panel @ panel.T"""
        raise NotImplementedError


class NativeBackend(KernelBackend):
    """Plain triple-loop kernels; the auditable reference for the blocked path."""

    name = "native"

    def factor_diag(self, block):
        m = block.shape[0]
        for c in range(m):
            t = 0.0
            for l in range(c):
                t += block[c, l] * block[c, l]
            pivot = block[c, c] - t
            if not pivot > 0.0:
                raise NotPositiveDefinite(c)
            d = math.sqrt(pivot)
            block[c, c] = d
            for r in range(c + 1, m):
                t = 0.0
                for l in range(c):
                    t += block[r, l] * block[c, l]
                block[r, c] = (block[r, c] - t) / d

    def solve_panel(self, panel, factor):
        rows, m = panel.shape
        for c in range(m):
            if factor[c, c] == 0.0:
                raise SingularFactor(f"zero diagonal at local column {c}")
        for r in range(rows):
            for c in range(m):
                t = 0.0
                for l in range(c):
                    t += panel[r, l] * factor[c, l]
                panel[r, c] = (panel[r, c] - t) / factor[c, c]

    def update_general(self, target, left, right):
        rows, cols = target.shape
        width = left.shape[1]
        for p in range(rows):
            for q in range(cols):
                t = 0.0
                for l in range(width):
                    t += left[p, l] * right[q, l]
                target[p, q] -= t

    def update_symmetric(self, target, panel):
        rows, width = panel.shape
        for p in range(rows):
            for q in range(p + 1):
                t = 0.0
                for l in range(width):
                    t += panel[p, l] * panel[q, l]
                target[p, q] -= t


class NumpyBackend(KernelBackend):
    """System kernels via numpy/scipy (BLAS level 3 plus LAPACK potrf)."""

    name = "numpy"

    def factor_diag(self, block):
        m = block.shape[0]
        tl = np.tril_indices(m)
        a = np.zeros((m, m), order="F")
        a[tl] = block[tl]
        c, info = dpotrf(a, lower=1, clean=0, overwrite_a=1)
        if info > 0:
            raise NotPositiveDefinite(info - 1)
        if info < 0:
            raise BandCholError(f"dpotrf: illegal argument {-info}")
        block[tl] = c[tl]

    def solve_panel(self, panel, factor):
        try:
            y = solve_triangular(factor, panel.T, lower=True, check_finite=False)
        except LinAlgError as exc:
            raise SingularFactor(str(exc)) from None
        panel[...] = y.T

    def update_general(self, target, left, right):
        target -= left @ right.T

    def update_symmetric(self, target, panel):
        tl = np.tril_indices(target.shape[0])
        prod = panel @ panel.T
        target[tl] -= prod[tl]


# -- engine ---------------------------------------------------------------------

@dataclass(frozen=True)
class TraceEvent:
    kind: TaskKind
    window: int
    row: int
    col: int


def window_program(window: WindowDesc, grid_dim: int):
    """Yield the (kind, i, j) steps of one window in serial program order."""
    n = grid_dim
    cells = window.cells
    yield (TaskKind.FACTOR_DIAG, 0, 0)
    for i in range(1, n - 1):
        if (i, 0) not in cells:
            return
        yield (TaskKind.SOLVE_PANEL, i, 0)
        for j in range(1, i):
            yield (TaskKind.UPDATE_GENERAL, i, j)
        yield (TaskKind.UPDATE_SYMMETRIC, i, i)
    if (n - 1, 0) in cells:
        yield (TaskKind.COPY_IN, n - 1, 0)
        yield (TaskKind.SOLVE_PANEL, n - 1, 0)
        for j in range(1, n - 1):
            yield (TaskKind.UPDATE_GENERAL, n - 1, j)
        yield (TaskKind.UPDATE_SYMMETRIC, n - 1, n - 1)
        yield (TaskKind.COPY_BACK, n - 1, 0)


def run_block_op(matrix: BandedMatrix, window: WindowDesc, grid_dim: int,
                 kind: TaskKind, i: int, j: int, backend: KernelBackend,
                 work: WorkArray | None, check_invariants: bool = False):
    """Execute one window step; returns the window's work array (possibly new).

    Bottom-row steps (i == grid_dim - 1) take their panel operand from the
    work array rather than the matrix.  Shared by the serial engine and the
    parallel executor so both run byte-identical arithmetic.
    """
    cells = window.cells
    bottom = grid_dim - 1
    if kind is TaskKind.FACTOR_DIAG:
        cell = cells[(0, 0)]
        try:
            backend.factor_diag(cell_view(matrix, cell))
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(cell.col_start + exc.column) from None
        return work
    if kind is TaskKind.COPY_IN:
        return WorkArray.load(matrix, cells[(bottom, 0)])
    if kind is TaskKind.SOLVE_PANEL:
        diag = cell_view(matrix, cells[(0, 0)])
        if i == bottom:
            if check_invariants:
                assert not np.tril(work.buffer, -1).any(), \
                    "work array strict lower must be zero before the solve"
            backend.solve_panel(work.buffer, diag)
        else:
            backend.solve_panel(cell_view(matrix, cells[(i, 0)]), diag)
        return work
    if kind is TaskKind.UPDATE_GENERAL:
        left = work.buffer if i == bottom else cell_view(matrix, cells[(i, 0)])
        backend.update_general(cell_view(matrix, cells[(i, j)]), left,
                               cell_view(matrix, cells[(j, 0)]))
        return work
    if kind is TaskKind.UPDATE_SYMMETRIC:
        panel = work.buffer if i == bottom else cell_view(matrix, cells[(i, 0)])
        backend.update_symmetric(cell_view(matrix, cells[(i, i)]), panel)
        return work
    if kind is TaskKind.COPY_BACK:
        work.store(matrix, cells[(bottom, 0)])
        return work
    raise BandCholError(f"unknown task kind {kind!r}")


def factor_blocked_serial(matrix: BandedMatrix, grid_dim: int, *,
                          backend: KernelBackend | None = None,
                          trace: list | None = None,
                          check_invariants: bool = False) -> BandedMatrix:
    """Blocked factorization, one window at a time in program order.

    Overwrites `matrix` with L and returns it.  BLAS pools are pinned to a
    single thread for the duration so results are reproducible and directly
    comparable with the task-parallel executor.  Pass a list as `trace` to
    record one TraceEvent per executed step.
    """
    if backend is None:
        backend = NumpyBackend()
    plan = plan_windows(matrix.dim, matrix.bandwidth, grid_dim)
    with threadpool_limits(limits=1, user_api="blas"):
        for w in plan.windows:
            work = None
            for kind, i, j in window_program(w, plan.grid_dim):
                work = run_block_op(matrix, w, plan.grid_dim, kind, i, j,
                                    backend, work, check_invariants)
                if trace is not None:
                    trace.append(TraceEvent(kind, w.index, i, j))
    return matrix
