"""Packed storage for symmetric banded matrices, plus shared utilities.

Storage convention
------------------
Only the lower band is stored.  A symmetric matrix of dimension N and
(sub)bandwidth k is held as N column panels of length `lead_dim` each,
laid out back to back in one contiguous float64 buffer:

    element (i, j), with j <= i <= min(N-1, j+k), lives at offset
        j * lead_dim + (i - j)

so offset 0 of panel j is the diagonal entry (j, j) and offset d is the
d-th subdiagonal.  `lead_dim >= k + 1`; any slots past row min(N-1, j+k)
in a panel are padding, kept at zero and ignored by every operation.

The same buffer can be viewed as a 2-D array `panel` of shape
(lead_dim, N) with panel[d, j] == element (j + d, j), which is what the
vectorized routines below use.
"""

from __future__ import annotations

import struct

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import InvalidBandwidth, OutOfBand, ShapeMismatch, SingularFactor

_FIXTURE_MAGIC = b"BNDM"
_FIXTURE_HEADER = struct.Struct("<4sIII")


def index_map(i: int, j: int, lead_dim: int) -> int:
    """Map an in-band (i, j) pair to its flat storage offset.

    Raises OutOfBand for upper-triangle indices (i < j) and for indices
    below the band held by a panel of the given lead dimension.
    """
    if i < j:
        raise OutOfBand(f"({i}, {j}) lies in the unstored upper triangle")
    if i - j >= lead_dim:
        raise OutOfBand(f"({i}, {j}) lies below the band for lead_dim={lead_dim}")
    return j * lead_dim + (i - j)


class BandedMatrix:
    """Symmetric banded matrix in packed lower-band storage."""

    __slots__ = ("dim", "bandwidth", "lead_dim", "data")

    def __init__(self, dim: int, bandwidth: int, lead_dim: int | None = None,
                 data: np.ndarray | None = None):
        if dim < 1:
            raise ShapeMismatch(f"dimension must be positive, got {dim}")
        if bandwidth < 0 or bandwidth >= dim:
            raise InvalidBandwidth(f"bandwidth {bandwidth} invalid for dimension {dim}")
        if lead_dim is None:
            lead_dim = bandwidth + 1
        if lead_dim < bandwidth + 1:
            raise ShapeMismatch(f"lead_dim {lead_dim} < bandwidth+1 ({bandwidth + 1})")
        self.dim = int(dim)
        self.bandwidth = int(bandwidth)
        self.lead_dim = int(lead_dim)
        if data is None:
            data = np.zeros(self.lead_dim * self.dim)
        else:
            data = np.ascontiguousarray(data, dtype=np.float64)
            if data.shape != (self.lead_dim * self.dim,):
                raise ShapeMismatch(
                    f"data length {data.shape} != lead_dim*dim = {self.lead_dim * self.dim}")
        self.data = data

    # -- views ------------------------------------------------------------

    @property
    def panel(self) -> np.ndarray:
        """(lead_dim, N) view of the storage; panel[d, j] = element (j+d, j)."""
        return self.data.reshape(self.dim, self.lead_dim).T

    def row_view(self, i: int) -> np.ndarray:
        """Strided 1-D view of stored row i: entries (i, l) for l in [max(0,i-k), i]."""
        lo = max(0, i - self.bandwidth)
        length = i - lo + 1
        start = lo * self.lead_dim + (i - lo)
        step = self.lead_dim - 1
        stop = start + (length - 1) * step + 1
        itemsize = self.data.itemsize
        return as_strided(self.data[start:stop], shape=(length,),
                          strides=(step * itemsize,))

    # -- element access ---------------------------------------------------

    def offset(self, i: int, j: int) -> int:
        """Strict storage offset of a stored (lower, in-band) element."""
        if not (0 <= j <= i < self.dim):
            raise OutOfBand(f"({i}, {j}) outside the stored lower triangle of dim {self.dim}")
        if i - j > self.bandwidth:
            raise OutOfBand(f"({i}, {j}) outside bandwidth {self.bandwidth}")
        return index_map(i, j, self.lead_dim)

    def get(self, i: int, j: int) -> float:
        """Mathematical value A(i, j): symmetric, zero outside the band."""
        if i < j:
            i, j = j, i
        if not (0 <= j and i < self.dim):
            raise OutOfBand(f"({i}, {j}) outside a {self.dim}x{self.dim} matrix")
        if i - j > self.bandwidth:
            return 0.0
        return float(self.data[index_map(i, j, self.lead_dim)])

    def set(self, i: int, j: int, value: float) -> None:
        self.data[self.offset(i, j)] = value

    # -- whole-matrix helpers ----------------------------------------------

    def copy(self) -> "BandedMatrix":
        return BandedMatrix(self.dim, self.bandwidth, self.lead_dim, self.data.copy())

    def band_panel(self) -> np.ndarray:
        """Fresh (k+1, N) copy of the band with padding forced to zero."""
        p = self.panel[: self.bandwidth + 1].copy()
        for d in range(1, self.bandwidth + 1):
            p[d, self.dim - d:] = 0.0
        return p

    def to_dense(self) -> np.ndarray:
        """Unpack into a full symmetric dense matrix (test/oracle sized inputs)."""
        n, k = self.dim, self.bandwidth
        dense = np.zeros((n, n))
        p = self.panel
        for d in range(0, k + 1):
            idx = np.arange(n - d)
            dense[idx + d, idx] = p[d, : n - d]
        dense = dense + np.tril(dense, -1).T
        return dense

    @classmethod
    def from_dense(cls, dense: np.ndarray, bandwidth: int,
                   lead_dim: int | None = None) -> "BandedMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        n = dense.shape[0]
        if dense.shape != (n, n):
            raise ShapeMismatch(f"dense input must be square, got {dense.shape}")
        m = cls(n, bandwidth, lead_dim)
        p = m.panel
        for d in range(0, bandwidth + 1):
            idx = np.arange(n - d)
            p[d, : n - d] = dense[idx + d, idx]
        return m


# -- construction -----------------------------------------------------------

def generate_spd(dim: int, bandwidth: int, seed: int) -> BandedMatrix:
    """Random diagonally dominant SPD matrix with the given band.

    Off-diagonal in-band entries are drawn uniformly from [-1, 1] with
    numpy's default PCG64 generator; each diagonal entry is then set to
    1 + sum of |off-diagonal| over its full symmetric row, which makes the
    matrix strictly diagonally dominant and hence positive definite.
    The same seed reproduces the same matrix bit for bit.
    """
    m = BandedMatrix(dim, bandwidth)
    n, k = m.dim, m.bandwidth
    p = m.panel
    rng = np.random.default_rng(seed)
    if k:
        draw = rng.uniform(-1.0, 1.0, size=(k, n))
        for d in range(1, k + 1):
            p[d, : n - d] = draw[d - 1, : n - d]
        absval = np.abs(p[1: k + 1])
        # column part: entries below the diagonal in column i == row i entries right of the diagonal
        rowsum = absval.sum(axis=0)
        # row part: stored entries left of the diagonal in row i
        for d in range(1, k + 1):
            rowsum[d:] += absval[d - 1, : n - d]
        p[0, :] = 1.0 + rowsum
    else:
        p[0, :] = 1.0
    return m


# -- verification -----------------------------------------------------------

def residual_norm(original: BandedMatrix, factor: BandedMatrix) -> float:
    """Relative factorization residual ||A - L L^T||_F / ||A||_F.

    L L^T of a lower factor with bandwidth k cannot exceed bandwidth k, so
    both norms are accumulated over in-band entries only; off-diagonal
    entries are weighted twice so the result is the true symmetric
    Frobenius norm.
    """
    if original.dim != factor.dim or original.bandwidth != factor.bandwidth:
        raise ShapeMismatch(
            f"matrix ({original.dim}, k={original.bandwidth}) vs "
            f"factor ({factor.dim}, k={factor.bandwidth})")
    n, k = original.dim, original.bandwidth
    a = original.band_panel()
    l = factor.band_panel()
    recon = np.zeros_like(a)
    for d in range(0, k + 1):
        for s in range(0, k + 1 - d):
            # (L L^T)(j+d, j) accumulates L(j+d, j-s) * L(j, j-s)
            recon[d, s:] += l[d + s, : n - s] * l[s, : n - s]
    diff = a - recon
    weights = np.full((k + 1, 1), 2.0)
    weights[0, 0] = 1.0
    num = float(np.sum(weights * diff * diff))
    den = float(np.sum(weights * a * a))
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(np.sqrt(num / den))


def solve_with_factor(factor: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs given the banded Cholesky factor L (A = L L^T).

    Forward substitution uses strided row views of L, the transposed
    backward sweep uses contiguous column panels.
    """
    n, k = factor.dim, factor.bandwidth
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape != (n,):
        raise ShapeMismatch(f"rhs shape {b.shape} does not match dimension {n}")
    p = factor.panel
    diag = p[0, :]
    if np.any(diag <= 0.0):
        bad = int(np.argmax(diag <= 0.0))
        raise SingularFactor(f"factor diagonal not positive at column {bad}")
    y = np.empty(n)
    for i in range(n):
        lo = max(0, i - k)
        row = factor.row_view(i)
        y[i] = (b[i] - np.dot(row[: i - lo], y[lo:i])) / diag[i]
    x = np.empty(n)
    for j in range(n - 1, -1, -1):
        m = min(k, n - 1 - j)
        x[j] = (y[j] - np.dot(p[1: m + 1, j], x[j + 1: j + 1 + m])) / diag[j]
    return x


def pad_bandwidth(matrix: BandedMatrix, new_bandwidth: int) -> BandedMatrix:
    """Copy into a wider band; the extra diagonals are explicit zeros."""
    n, k = matrix.dim, matrix.bandwidth
    if new_bandwidth < k:
        raise InvalidBandwidth(f"cannot shrink bandwidth {k} to {new_bandwidth}")
    if new_bandwidth >= n:
        raise InvalidBandwidth(f"padded bandwidth {new_bandwidth} must stay below dim {n}")
    out = BandedMatrix(n, new_bandwidth)
    out.panel[: k + 1, :] = matrix.band_panel()
    return out


# -- fixture I/O --------------------------------------------------------------

def save_matrix(matrix: BandedMatrix, path) -> None:
    """Write the binary fixture: 'BNDM', u32 N, u32 k, u32 lead_dim (all
    little-endian), then lead_dim*N float64 little-endian column panels
    with padding bytes zeroed."""
    clean = np.zeros(matrix.lead_dim * matrix.dim)
    clean.reshape(matrix.dim, matrix.lead_dim).T[: matrix.bandwidth + 1] = matrix.band_panel()
    header = _FIXTURE_HEADER.pack(_FIXTURE_MAGIC, matrix.dim, matrix.bandwidth,
                                  matrix.lead_dim)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(clean.astype("<f8", copy=False).tobytes())


def load_matrix(path) -> BandedMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _FIXTURE_HEADER.size:
        raise ShapeMismatch("fixture truncated before header end")
    magic, dim, bandwidth, lead_dim = _FIXTURE_HEADER.unpack_from(blob)
    if magic != _FIXTURE_MAGIC:
        raise ShapeMismatch(f"bad fixture magic {magic!r}")
    expected = _FIXTURE_HEADER.size + 8 * lead_dim * dim
    if len(blob) != expected:
        raise ShapeMismatch(f"fixture payload is {len(blob)} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype="<f8", offset=_FIXTURE_HEADER.size).astype(
        np.float64, copy=True)
    return BandedMatrix(dim, bandwidth, lead_dim, data)
