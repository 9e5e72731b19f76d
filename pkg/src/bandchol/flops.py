"""Analytic operation counts for the banded factorization.

The exact count is the triple sum

    sum_{i=1}^{N} [ sum_{j=r(i)}^{i} sum_{l=r(i)}^{j} 2  +  2 ]
    with r(i) = max(1, i - k),

i.e. 2 ops per inner accumulation term plus 2 per finalize, counting the
square root as one op folded into the 2-op finalize.  Rows past the band
head all cost (k+1)(k+4), so the sum collapses to a k-term loop plus a
closed steady-state term; tests validate this against a literal
triple-loop evaluation and against the instrumented loop-skeleton count.
"""

from __future__ import annotations

from .errors import CountOverflow, InvalidBandwidth

U64_MAX = 2**64 - 1


def _validate(dim: int, bandwidth: int) -> None:
    if dim < 1:
        raise InvalidBandwidth(f"dimension must be positive, got {dim}")
    if bandwidth < 0 or bandwidth >= dim:
        raise InvalidBandwidth(f"bandwidth {bandwidth} invalid for dimension {dim}")


def flops_exact(dim: int, bandwidth: int) -> int:
    """Exact op count of the banded factorization (integer, no rounding)."""
    _validate(dim, bandwidth)
    n, k = dim, bandwidth
    # rows i <= k have truncated width w = i; all later rows cost (k+1)(k+4)
    total = (n - k) * (k + 1) * (k + 4)
    for w in range(1, k + 1):
        total += w * (w + 3)
    if total > U64_MAX:
        raise CountOverflow(f"flops_exact({n}, {k}) = {total} exceeds u64")
    return total


def flops_approx(dim: int, bandwidth: int) -> int:
    """Leading-order model N*k^2 + 2*N*k (exact integer arithmetic)."""
    _validate(dim, bandwidth)
    total = dim * bandwidth * (bandwidth + 2)
    if total > U64_MAX:
        raise CountOverflow(f"flops_approx({dim}, {bandwidth}) = {total} exceeds u64")
    return total
