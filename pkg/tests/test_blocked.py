"""Window planning, block kernels, work-array staging, serial blocked engine."""

import numpy as np
import pytest

from bandchol import (BandedMatrix, BandwidthNotDivisible, GridTooSmall,
                      InvalidBandwidth, NotPositiveDefinite, SingularFactor,
                      TaskKind, WorkArray, cell_view, factor_blocked_serial,
                      generate_spd, index_map, plan_windows, residual_norm)
from bandchol.blocked import NativeBackend, NumpyBackend
from bandchol.reference import factor_reference

from conftest import dense_mirror, lower_band_rows

BACKENDS = [NativeBackend, NumpyBackend]


# -- plan_windows ---------------------------------------------------------------

def test_plan_9_2_3():
    plan = plan_windows(9, 2, 3)
    assert plan.block_size == 1
    assert len(plan.windows) == 9
    for t, win in enumerate(plan.windows):
        assert win.index == t
        assert win.start == t


def test_plan_100_2_3():
    plan = plan_windows(100, 2, 3)
    assert plan.block_size == 1
    assert len(plan.windows) == 100


def test_plan_rejects_indivisible():
    with pytest.raises(BandwidthNotDivisible):
        plan_windows(10, 3, 3)


def test_plan_rejects_small_grid():
    with pytest.raises(GridTooSmall):
        plan_windows(10, 2, 2)


def test_plan_rejects_bad_bandwidth():
    with pytest.raises(InvalidBandwidth):
        plan_windows(10, 1, 3)
    with pytest.raises(InvalidBandwidth):
        plan_windows(10, 12, 3)


def test_plan_window_overlap():
    plan = plan_windows(60, 8, 5)
    b = plan.block_size
    assert b == 2
    for t, win in enumerate(plan.windows):
        assert win.start == t * b
    # a full window spans n*b = k+b rows; consecutive starts differ by b,
    # so consecutive full windows overlap by exactly k rows
    for prev, cur in zip(plan.windows, plan.windows[1:]):
        assert cur.start - prev.start == b
        full_span = plan.grid_dim * b
        assert (prev.start + full_span) - cur.start == 8


def test_plan_diagonal_cells_cover_dimension():
    for n_dim, k, n in [(60, 8, 5), (9, 2, 3), (37, 6, 4), (11, 4, 3)]:
        plan = plan_windows(n_dim, k, n)
        covered = np.zeros(n_dim, dtype=int)
        for win in plan.windows:
            cell = win.cells[(0, 0)]
            covered[cell.row_start:cell.row_stop] += 1
        assert np.all(covered == 1)


def test_plan_alias_shift():
    plan = plan_windows(60, 8, 5)
    for prev, cur in zip(plan.windows, plan.windows[1:]):
        for (i, j), cell in cur.cells.items():
            if i + 1 < plan.grid_dim and j + 1 <= i + 1 and (i + 1, j + 1) in prev.cells:
                alias = prev.cells[(i + 1, j + 1)]
                if not alias.trapezoid and not cell.trapezoid:
                    assert (cell.row_start, cell.col_start) == \
                        (alias.row_start, alias.col_start)


def test_plan_trapezoid_flag_only_bottom_left():
    plan = plan_windows(40, 6, 4)
    for win in plan.windows:
        for (i, j), cell in win.cells.items():
            assert cell.trapezoid == (i == plan.grid_dim - 1 and j == 0)


def test_plan_clamps_tail_windows():
    plan = plan_windows(10, 4, 3)  # b=2, 5 windows
    last = plan.windows[-1]
    assert set(last.cells) == {(0, 0)}
    assert last.cells[(0, 0)].row_stop == 10
    for win in plan.windows:
        for cell in win.cells.values():
            assert cell.row_stop <= 10 and cell.col_stop <= 10
            assert cell.row_stop > cell.row_start
            assert cell.col_stop > cell.col_start


# -- cell_view / WorkArray --------------------------------------------------------

def test_cell_view_addresses_expected_storage():
    m = generate_spd(24, 6, seed=4)
    plan = plan_windows(24, 6, 4)
    win = plan.windows[1]
    for (i, j), cell in win.cells.items():
        if cell.trapezoid:
            continue
        view = cell_view(m, cell)
        for p in range(cell.row_count):
            for q in range(cell.col_count):
                gi, gj = cell.row_start + p, cell.col_start + q
                if gi >= gj and i == j and q > p:
                    continue
                if gi >= gj:
                    assert view[p, q] == m.get(gi, gj)


def test_cell_views_disjoint_within_window():
    n_dim, k, n = 24, 6, 4
    m = BandedMatrix(n_dim, k)
    plan = plan_windows(n_dim, k, n)
    win = plan.windows[0]
    marker = 1.0
    expected = {}
    for (i, j), cell in sorted(win.cells.items()):
        if cell.trapezoid:
            continue
        view = cell_view(m, cell)
        for p in range(cell.row_count):
            for q in range(cell.col_count):
                if i == j and q > p:
                    continue
                view[p, q] = marker
                expected[(cell.row_start + p, cell.col_start + q)] = marker
                marker += 1.0
    for (gi, gj), want in expected.items():
        assert m.data[index_map(gi, gj, m.lead_dim)] == want
    assert np.count_nonzero(m.data) == len(expected)


def test_work_array_staging_round_trip():
    m = generate_spd(30, 6, seed=5)
    plan = plan_windows(30, 6, 3)
    win = plan.windows[2]
    cell = win.cells[(2, 0)]
    assert cell.trapezoid
    work = WorkArray.load(m, cell)
    b = plan.block_size
    for p in range(cell.row_count):
        for q in range(cell.col_count):
            gi, gj = cell.row_start + p, cell.col_start + q
            if gi - gj <= 6:
                assert work.buffer[p, q] == m.get(gi, gj)
            else:
                assert work.buffer[p, q] == 0.0
    # in-band region sits at p <= q: upper triangle filled, strict lower zero
    assert np.all(work.buffer[np.tril_indices(b, -1)] == 0.0)
    work.buffer[np.triu_indices_from(work.buffer)] += 3.0
    work.store(m, cell)
    for p in range(cell.row_count):
        for q in range(cell.col_count):
            gi, gj = cell.row_start + p, cell.col_start + q
            if gi - gj <= 6:
                assert m.get(gi, gj) == work.buffer[p, q]


# -- kernels ----------------------------------------------------------------------

@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_factor_diag_1x1(backend_cls):
    block = np.array([[4.0]])
    backend_cls().factor_diag(block)
    assert block[0, 0] == 2.0


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_factor_diag_hand_2x2_upper_untouched(backend_cls):
    block = np.array([[4.0, 99.0], [2.0, 5.0]])
    backend_cls().factor_diag(block)
    assert block[0, 0] == 2.0
    assert block[1, 0] == 1.0
    assert block[1, 1] == 2.0
    assert block[0, 1] == 99.0


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_factor_diag_dense_oracle_50(backend_cls):
    rng = np.random.default_rng(7)
    a = rng.uniform(-1.0, 1.0, (50, 50))
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, 1.0 + np.sum(np.abs(a), axis=1))
    block = np.tril(a).copy()
    backend_cls().factor_diag(block)
    want = np.linalg.cholesky(a)
    assert np.max(np.abs(np.tril(block) - want)) <= 1e-13


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_factor_diag_rejects_indefinite(backend_cls):
    block = np.array([[1.0, 0.0, 0.0], [0.0, -4.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(NotPositiveDefinite) as err:
        backend_cls().factor_diag(block)
    assert err.value.column == 1


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_solve_panel_identity_factor(backend_cls):
    panel = np.arange(9.0).reshape(3, 3)
    before = panel.copy()
    backend_cls().solve_panel(panel, np.eye(3))
    assert np.array_equal(panel, before)


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_solve_panel_inverse_pair(backend_cls):
    rng = np.random.default_rng(8)
    factor = np.tril(rng.uniform(0.5, 1.5, (5, 5)))
    panel = factor.T.copy()
    backend_cls().solve_panel(panel, factor)
    assert np.max(np.abs(panel - np.eye(5))) <= 1e-14


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_solve_panel_multiply_back(backend_cls):
    rng = np.random.default_rng(9)
    factor = np.tril(rng.uniform(0.5, 1.5, (8, 8)))
    original = rng.standard_normal((8, 8))
    panel = original.copy()
    backend_cls().solve_panel(panel, factor)
    assert np.max(np.abs(panel @ factor.T - original)) <= 1e-13


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_solve_panel_singular(backend_cls):
    factor = np.eye(4)
    factor[2, 2] = 0.0
    with pytest.raises(SingularFactor):
        backend_cls().solve_panel(np.ones((4, 4)), factor)


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_update_general_zero_left(backend_cls):
    target = np.arange(16.0).reshape(4, 4)
    before = target.copy()
    backend_cls().update_general(target, np.zeros((4, 4)), np.ones((4, 4)))
    assert np.array_equal(target, before)


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_update_general_identity_product(backend_cls):
    target = np.full((3, 3), 5.0)
    backend_cls().update_general(target, np.eye(3), np.eye(3))
    assert np.array_equal(target, np.full((3, 3), 5.0) - np.eye(3))


def _naive_general(target, left, right):
    out = target.copy()
    for p in range(out.shape[0]):
        for q in range(out.shape[1]):
            out[p, q] -= sum(left[p, m] * right[q, m] for m in range(left.shape[1]))
    return out


def test_update_general_native_matches_naive_exactly():
    rng = np.random.default_rng(10)
    target = rng.standard_normal((6, 6))
    left = rng.standard_normal((6, 6))
    right = rng.standard_normal((6, 6))
    want = _naive_general(target, left, right)
    got = target.copy()
    NativeBackend().update_general(got, left, right)
    assert np.array_equal(got, want)


def test_update_general_numpy_matches_naive_closely():
    rng = np.random.default_rng(10)
    target = rng.standard_normal((6, 6))
    left = rng.standard_normal((6, 6))
    right = rng.standard_normal((6, 6))
    want = _naive_general(target, left, right)
    got = target.copy()
    NumpyBackend().update_general(got, left, right)
    assert np.max(np.abs(got - want)) <= 1e-14


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_update_symmetric_zero_panel(backend_cls):
    target = np.arange(16.0).reshape(4, 4)
    before = target.copy()
    backend_cls().update_symmetric(target, np.zeros((4, 4)))
    assert np.array_equal(target, before)


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_update_symmetric_identity_panel(backend_cls):
    target = np.full((3, 3), 7.0)
    backend_cls().update_symmetric(target, np.eye(3))
    assert np.array_equal(np.tril(target), np.tril(np.full((3, 3), 7.0) - np.eye(3)))
    assert np.array_equal(np.triu(target, 1), np.triu(np.full((3, 3), 7.0), 1))


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_update_symmetric_matches_general_on_lower(backend_cls):
    rng = np.random.default_rng(11)
    target = rng.standard_normal((6, 6))
    panel = rng.standard_normal((6, 6))
    sym = target.copy()
    backend_cls().update_symmetric(sym, panel)
    gen = target.copy()
    backend_cls().update_general(gen, panel, panel)
    assert np.allclose(np.tril(sym), np.tril(gen), atol=1e-14)
    assert np.array_equal(np.triu(sym, 1), np.triu(target, 1))


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_kernels_bit_deterministic(backend_cls):
    rng = np.random.default_rng(12)
    a = rng.uniform(-1.0, 1.0, (16, 16))
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, 1.0 + np.sum(np.abs(a), axis=1))
    outs = []
    for _ in range(2):
        block = np.tril(a).copy()
        backend_cls().factor_diag(block)
        panel = a.copy()
        backend_cls().solve_panel(panel, np.tril(block))
        tgt = a.copy()
        backend_cls().update_symmetric(tgt, panel)
        outs.append((block.tobytes(), panel.tobytes(), tgt.tobytes()))
    assert outs[0] == outs[1]


# -- serial blocked engine ----------------------------------------------------------

def test_blocked_identity():
    a = BandedMatrix(20, 2)
    for i in range(20):
        a.set(i, i, 1.0)
    before = a.band_panel().copy()
    fac = factor_blocked_serial(a, 3)
    assert np.array_equal(fac.band_panel(), before)


def test_blocked_embedded_hand_case():
    a = BandedMatrix(20, 2)
    for i in range(20):
        a.set(i, i, 1.0)
    a.set(0, 0, 4.0)
    a.set(1, 0, 2.0)
    a.set(1, 1, 5.0)
    fac = factor_blocked_serial(a, 3)
    assert abs(fac.get(0, 0) - 2.0) <= 1e-15
    assert abs(fac.get(1, 0) - 1.0) <= 1e-15
    assert abs(fac.get(1, 1) - 2.0) <= 1e-15


@pytest.mark.parametrize("grid", [3, 5])
@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_blocked_matches_reference_120_8(grid, backend_cls):
    a = generate_spd(120, 8, seed=5)
    ref = factor_reference(a.copy()).factor.band_panel()
    fac = factor_blocked_serial(a.copy(), grid, backend=backend_cls())
    scale = np.maximum(np.abs(ref), 1.0)
    assert np.max(np.abs(fac.band_panel() - ref) / scale) <= 1e-11


def test_blocked_residual_contract():
    a = generate_spd(300, 12, seed=6)
    fac = factor_blocked_serial(a.copy(), 4)
    assert residual_norm(a, fac) <= 1e-10


def test_blocked_equivalent_across_grids():
    a = generate_spd(120, 8, seed=7)
    outs = [factor_blocked_serial(a.copy(), n).band_panel() for n in (3, 5, 9)]
    for other in outs[1:]:
        scale = np.maximum(np.abs(outs[0]), 1.0)
        assert np.max(np.abs(other - outs[0]) / scale) <= 1e-11


def test_blocked_rejects_indivisible_and_small_grid():
    a = generate_spd(30, 5, seed=0)
    with pytest.raises(BandwidthNotDivisible):
        factor_blocked_serial(a, 3)
    with pytest.raises(GridTooSmall):
        factor_blocked_serial(generate_spd(30, 4, seed=0), 2)


@pytest.mark.parametrize("backend_cls", BACKENDS)
def test_blocked_reports_global_failure_column(backend_cls):
    a = generate_spd(40, 4, seed=8)
    a.set(17, 17, -1.0)
    with pytest.raises(NotPositiveDefinite) as err:
        factor_blocked_serial(a, 3, backend=backend_cls())
    assert err.value.column == 17


def test_blocked_work_array_hygiene_checks_pass():
    a = generate_spd(64, 6, seed=9)
    ref = factor_reference(a.copy()).factor.band_panel()
    fac = factor_blocked_serial(a.copy(), 4, check_invariants=True)
    assert np.max(np.abs(fac.band_panel() - ref)) <= 1e-11


def test_blocked_padding_rows_stay_zero():
    a = generate_spd(45, 6, seed=10)
    fac = factor_blocked_serial(a.copy(), 3)
    panel = fac.panel
    for j in range(45):
        top = min(44, j + 6) - j
        assert np.all(panel[top + 1:, j] == 0.0)


# -- trace ------------------------------------------------------------------------

EIGHT_STEPS = [
    (TaskKind.FACTOR_DIAG, 0, 0),
    (TaskKind.SOLVE_PANEL, 1, 0),
    (TaskKind.UPDATE_SYMMETRIC, 1, 1),
    (TaskKind.COPY_IN, 2, 0),
    (TaskKind.SOLVE_PANEL, 2, 0),
    (TaskKind.UPDATE_GENERAL, 2, 1),
    (TaskKind.UPDATE_SYMMETRIC, 2, 2),
    (TaskKind.COPY_BACK, 2, 0),
]


def test_trace_full_window_eight_steps():
    a = generate_spd(12, 2, seed=0)
    trace = []
    factor_blocked_serial(a, 3, trace=trace)
    first = [(e.kind, e.row, e.col) for e in trace if e.window == 0]
    assert first == EIGHT_STEPS


def test_trace_kind_counts_full_window():
    a = generate_spd(40, 8, seed=1)
    trace = []
    factor_blocked_serial(a, 5, trace=trace)
    first = [e for e in trace if e.window == 0]
    kinds = [e.kind for e in first]
    n = 5
    assert kinds.count(TaskKind.FACTOR_DIAG) == 1
    assert kinds.count(TaskKind.SOLVE_PANEL) == n - 1
    assert kinds.count(TaskKind.UPDATE_GENERAL) == (n - 1) * (n - 2) // 2
    assert kinds.count(TaskKind.UPDATE_SYMMETRIC) == n - 1
    assert kinds.count(TaskKind.COPY_IN) == 1
    assert kinds.count(TaskKind.COPY_BACK) == 1


def test_block_cover_property():
    n_dim, k, grid = 37, 6, 4
    a = generate_spd(n_dim, k, seed=2)
    plan = plan_windows(n_dim, k, grid)
    trace = []
    factor_blocked_serial(a, grid, trace=trace)
    cover = np.zeros((n_dim, n_dim), dtype=int)
    for ev in trace:
        if ev.kind not in (TaskKind.FACTOR_DIAG, TaskKind.SOLVE_PANEL):
            continue
        cell = plan.windows[ev.window].cells[(ev.row, ev.col)]
        for q in range(cell.col_count):
            for p in range(cell.row_count):
                gi, gj = cell.row_start + p, cell.col_start + q
                if gi < gj or gi - gj > k:
                    continue
                if ev.kind is TaskKind.FACTOR_DIAG and p < q:
                    continue
                cover[gi, gj] += 1
    for j in range(n_dim):
        for i in range(j, min(n_dim - 1, j + k) + 1):
            assert cover[i, j] == 1, (i, j)
