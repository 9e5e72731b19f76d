"""Serial left-looking banded Cholesky, the package's correctness anchor.

Each factor entry is produced directly from the recurrence

    L(i,j) = (A(i,j) - sum_{l} L(i,l) L(j,l)) / L(j,j)      j < i
    L(i,i) = sqrt(A(i,i) - sum_{l} L(i,l)^2)

with l running over the in-band prefix [max(0, i-k), j-1].  The kernel is
written for auditability, not speed: rows are walked in order and the inner
accumulation is an exactly rounded sum (math.fsum), which makes the factor
bit-reproducible and, in particular, invariant under widening the band with
explicit zero diagonals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import BandedMatrix
from .errors import NotPositiveDefinite


@dataclass
class FactorResult:
    """Outcome of factor_reference: the (in-place) factor plus an optional
    tally of floating point operations actually executed."""
    factor: BandedMatrix
    flop_count: int | None = None


def factor_reference(matrix: BandedMatrix, instrument: bool = False) -> FactorResult:
    """Factor in place; `matrix` storage holds L on return.

    Raises NotPositiveDefinite (with the global column index) on a
    non-positive pivot.  With `instrument`, tallies one operation per
    multiply, add, subtract, divide, and square root executed.
    """
    n, k = matrix.dim, matrix.bandwidth
    rows = [matrix.row_view(i) for i in range(n)]
    fsum = math.fsum
    sqrt = math.sqrt
    flops = 0
    for i in range(n):
        lo = max(0, i - k)
        ri = rows[i]
        for j in range(lo, i + 1):
            jlo = max(0, j - k)
            cnt = j - lo
            if cnt:
                t = fsum((ri[:cnt] * rows[j][lo - jlo: j - jlo]).tolist())
            else:
                t = 0.0
            if i == j:
                pivot = ri[cnt] - t
                if not pivot > 0.0:
                    raise NotPositiveDefinite(i)
                ri[cnt] = sqrt(pivot)
            else:
                ri[cnt] = (ri[cnt] - t) / rows[j][j - jlo]
            if instrument:
                flops += 2 * cnt + 2
    return FactorResult(matrix, flops if instrument else None)


def count_flops_instrumented(dim: int, bandwidth: int) -> int:
    """Operation count from walking the factorization loop skeleton.

    The accumulation loop is tallied with its printed upper bound l <= j
    (2 ops per iteration), plus 2 per finalize statement, matching the
    analytic model in `flops.flops_exact`.  No arithmetic is performed.
    """
    total = 0
    for i in range(1, dim + 1):
        lo = max(1, i - bandwidth)
        for j in range(lo, i + 1):
            total += 2 * (j - lo + 1) + 2
    return total
