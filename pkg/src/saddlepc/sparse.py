"""Compressed-sparse-row matrices and the factorizations built on them.

Every sparse operand in the package is a :class:`SparseMatrix` in canonical
form: column indices strictly increasing inside each row, duplicates summed,
exact zeros pruned.  Canonical form makes equality testable bit-for-bit.

Dense matrices are plain 2-D ``numpy`` arrays; vectors are 1-D arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.linalg

from .errors import BreakdownPivot, DimensionMismatch, NotPositiveDefinite

EPS = np.finfo(float).eps


class SparseMatrix:
    """Real matrix in compressed sparse row storage.

    Instances are treated as immutable; every operation returns a new matrix.
    """

    __slots__ = ("nrows", "ncols", "row_ptr", "col_idx", "values")

    def __init__(self, nrows, ncols, row_ptr, col_idx, values, check=True):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(col_idx, dtype=np.int64)
        self.values = np.asarray(values, dtype=float)
        if check:
            self._check()

    def _check(self):
        rp, ci, v = self.row_ptr, self.col_idx, self.values
        if self.nrows < 0 or self.ncols < 0:
            raise ValueError("negative dimension")
        if rp.shape != (self.nrows + 1,) or rp[0] != 0:
            raise ValueError("row_ptr must have length nrows+1 and start at 0")
        if np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if rp[-1] != len(v) or len(ci) != len(v):
            raise ValueError("row_ptr[-1], len(col_idx) and len(values) disagree")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.ncols):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite matrix entry")
        if np.any(v == 0.0):
            raise ValueError("explicitly stored zero")
        # strictly increasing columns within a row <=> diff > 0 except at row starts
        if len(ci) > 1:
            d = np.diff(ci)
            starts = np.zeros(len(ci), dtype=bool)
            starts[rp[1:-1][rp[1:-1] < len(ci)]] = True
            if np.any((d <= 0) & ~starts[1:]):
                raise ValueError("column indices not strictly increasing in a row")

    # ------------------------------------------------------------------ builders
    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals) -> "SparseMatrix":
        """Build a canonical matrix from triplets, summing duplicates."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if not (len(rows) == len(cols) == len(vals)):
            raise DimensionMismatch("triplet arrays differ in length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= nrows:
                raise IndexError("row index out of range")
            if cols.min() < 0 or cols.max() >= ncols:
                raise IndexError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows):
            new = np.ones(len(rows), dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new)
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        row_ptr = np.zeros(nrows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=nrows), out=row_ptr[1:])
        return cls(nrows, ncols, row_ptr, cols, vals)

    @classmethod
    def from_dense(cls, M) -> "SparseMatrix":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        r, c = np.nonzero(M)
        return cls.from_coo(M.shape[0], M.shape[1], r, c, M[r, c])

    @classmethod
    def identity(cls, n, scale=1.0) -> "SparseMatrix":
        return cls.diag(np.full(n, float(scale)))

    @classmethod
    def diag(cls, d) -> "SparseMatrix":
        d = np.asarray(d, dtype=float)
        idx = np.arange(len(d))
        return cls.from_coo(len(d), len(d), idx, idx, d)

    @classmethod
    def zeros(cls, nrows, ncols) -> "SparseMatrix":
        return cls(nrows, ncols, np.zeros(nrows + 1, dtype=np.int64), [], [])

    # ----------------------------------------------------------------- queries
    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (COO row array)."""
        return np.repeat(np.arange(self.nrows), np.diff(self.row_ptr))

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def row(self, i):
        """(column indices, values) of row ``i``."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape))
        r = self.row_indices()
        on = r == self.col_idx
        d[r[on]] = self.values[on]
        return d

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.nnz else 0.0

    def to_dense(self) -> np.ndarray:
        M = np.zeros(self.shape)
        M[self.row_indices(), self.col_idx] = self.values
        return M

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"

    # -------------------------------------------------------------- arithmetic
    @property
    def T(self) -> "SparseMatrix":
        return transpose(self)

    def dot(self, x):
        """Product with a vector or with a dense matrix (column block)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return spmv(self, x)
        if x.shape[0] != self.ncols:
            raise DimensionMismatch(f"{self.shape} @ {x.shape}")
        out = np.zeros((self.nrows, x.shape[1]))
        np.add.at(out, self.row_indices(), self.values[:, None] * x[self.col_idx])
        return out

    def __matmul__(self, x):
        return self.dot(x)

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if self.shape != other.shape:
            raise DimensionMismatch(f"{self.shape} + {other.shape}")
        return SparseMatrix.from_coo(
            self.nrows, self.ncols,
            np.concatenate([self.row_indices(), other.row_indices()]),
            np.concatenate([self.col_idx, other.col_idx]),
            np.concatenate([self.values, other.values]),
        )

    def __sub__(self, other: "SparseMatrix") -> "SparseMatrix":
        return self + other.scale(-1.0)

    def scale(self, alpha: float) -> "SparseMatrix":
        if alpha == 0.0:
            return SparseMatrix.zeros(self.nrows, self.ncols)
        return SparseMatrix(self.nrows, self.ncols, self.row_ptr, self.col_idx,
                            alpha * self.values, check=False)

    def filter(self, keep: np.ndarray) -> "SparseMatrix":
        """Matrix with only the stored entries where ``keep`` is true."""
        r = self.row_indices()[keep]
        return SparseMatrix.from_coo(self.nrows, self.ncols, r, self.col_idx[keep],
                                     self.values[keep])

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        rmap = np.full(self.nrows, -1)
        rmap[rows] = np.arange(len(rows))
        cmap = np.full(self.ncols, -1)
        cmap[cols] = np.arange(len(cols))
        r = rmap[self.row_indices()]
        c = cmap[self.col_idx]
        keep = (r >= 0) & (c >= 0)
        return SparseMatrix.from_coo(len(rows), len(cols), r[keep], c[keep],
                                     self.values[keep])

    def bandwidth(self) -> int:
        """Largest |i - j| over stored entries."""
        if not self.nnz:
            return 0
        return int(np.abs(self.row_indices() - self.col_idx).max())

    def is_symmetric(self, rtol=0.0) -> bool:
        if self.nrows != self.ncols:
            return False
        if rtol == 0.0:
            return self == transpose(self)
        diff = self - transpose(self)
        return diff.max_abs() <= rtol * max(self.max_abs(), np.finfo(float).tiny)


Operand = Union[SparseMatrix, np.ndarray]


def as_vector(x, n=None) -> np.ndarray:
    """Validate ``x`` as a finite real vector (of length ``n`` if given)."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    if n is not None and len(v) != n:
        raise DimensionMismatch(f"expected length {n}, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def spmv(M: SparseMatrix, x) -> np.ndarray:
    """Sparse matrix-vector product ``M @ x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (M.ncols,):
        raise DimensionMismatch(f"matrix has {M.ncols} columns, vector has shape {x.shape}")
    return np.bincount(M.row_indices(), weights=M.values * x[M.col_idx],
                       minlength=M.nrows)


def transpose(M: SparseMatrix) -> SparseMatrix:
    return SparseMatrix.from_coo(M.ncols, M.nrows, M.col_idx, M.row_indices(), M.values)


def triple_product(B: SparseMatrix, rows) -> SparseMatrix:
    """``B^T W B`` for the 0/1 diagonal ``W`` selecting ``rows`` of ``B``.

    Only the upper triangle is accumulated and then mirrored, so the result is
    symmetric to the bit.
    """
    rows = np.asarray(sorted(set(int(i) for i in rows)), dtype=np.int64)
    if len(rows) and (rows[0] < 0 or rows[-1] >= B.nrows):
        raise IndexError(f"row index out of range [0, {B.nrows})")
    ri, ci, vi = [], [], []
    for i in rows:
        cols, vals = B.row(i)
        p, q = np.triu_indices(len(cols))
        ri.append(cols[p])
        ci.append(cols[q])
        vi.append(vals[p] * vals[q])
    n = B.ncols
    if not ri:
        return SparseMatrix.zeros(n, n)
    upper = SparseMatrix.from_coo(n, n, np.concatenate(ri), np.concatenate(ci),
                                  np.concatenate(vi))
    return symmetric_from_upper(upper)


def symmetric_from_upper(U: SparseMatrix) -> SparseMatrix:
    """Mirror the strict upper triangle of ``U`` onto the lower one."""
    r = U.row_indices()
    strict = U.col_idx > r
    return SparseMatrix.from_coo(
        U.nrows, U.ncols,
        np.concatenate([r[r <= U.col_idx], U.col_idx[strict]]),
        np.concatenate([U.col_idx[r <= U.col_idx], r[strict]]),
        np.concatenate([U.values[r <= U.col_idx], U.values[strict]]),
    )


def dense(M: Operand) -> np.ndarray:
    return M.to_dense() if isinstance(M, SparseMatrix) else np.asarray(M, dtype=float)


# ----------------------------------------------------------------- Cholesky
@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor ``L`` with ``L L^T`` equal (or close) to the input.

    ``kind`` is ``"dense"`` for an exact factorization held as an array and
    ``"incomplete"`` for a threshold IC factor held as a :class:`SparseMatrix`.
    ``shift`` records any diagonal shift applied before factorizing.
    """

    lower: Operand
    kind: str = "dense"
    shift: float = 0.0

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @property
    def nnz(self) -> int:
        if isinstance(self.lower, SparseMatrix):
            return self.lower.nnz
        return int(np.count_nonzero(np.tril(self.lower)))

    def solve(self, rhs) -> np.ndarray:
        """Solve ``L L^T x = rhs`` for a vector or a block of columns."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise DimensionMismatch(f"factor is {self.n}x{self.n}, rhs has {rhs.shape[0]} rows")
        if self.kind == "dense":
            return scipy.linalg.cho_solve((self.lower, True), rhs, check_finite=False)
        if rhs.ndim == 2:
            return np.column_stack([self.solve(rhs[:, j]) for j in range(rhs.shape[1])])
        return _lower_transpose_solve(self.lower, _lower_solve(self.lower, rhs))

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.n))

    def dense_lower(self) -> np.ndarray:
        return dense(self.lower)


def _lower_solve(L: SparseMatrix, b: np.ndarray) -> np.ndarray:
    # rows of L are sorted, so the diagonal is the last stored entry of each row
    x = np.array(b, dtype=float)
    rp, ci, v = L.row_ptr, L.col_idx, L.values
    for i in range(L.nrows):
        lo, hi = rp[i], rp[i + 1] - 1
        if hi > lo:
            x[i] -= v[lo:hi] @ x[ci[lo:hi]]
        x[i] /= v[hi]
    return x


def _lower_transpose_solve(L: SparseMatrix, b: np.ndarray) -> np.ndarray:
    x = np.array(b, dtype=float)
    rp, ci, v = L.row_ptr, L.col_idx, L.values
    for i in range(L.nrows - 1, -1, -1):
        lo, hi = rp[i], rp[i + 1] - 1
        x[i] /= v[hi]
        if hi > lo:
            x[ci[lo:hi]] -= v[lo:hi] * x[i]
    return x


def dense_cholesky(M: Operand, sym_rtol: float = 1e-10) -> CholeskyFactor:
    """Exact Cholesky factorization of a symmetric matrix.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is nonpositive, i.e. ``M`` is not numerically SPD.
    """
    A = dense(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {A.shape}")
    scale = np.abs(A).max() if A.size else 0.0
    if np.abs(A - A.T).max(initial=0.0) > sym_rtol * scale:
        raise ValueError("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    d = np.diag(L)
    if not np.all(np.isfinite(L)) or np.any(d <= 0):
        raise NotPositiveDefinite("nonpositive pivot")
    return CholeskyFactor(L, "dense")


def incomplete_cholesky(M: SparseMatrix, droptol: float, shift: float = 0.0) -> CholeskyFactor:
    """Threshold incomplete Cholesky (ICT), left-looking by columns.

    After column ``j`` of the factor is computed, off-diagonal entries with
    magnitude below ``droptol * ||M[j:, j]||_2`` are discarded.  ``droptol=0``
    keeps every nonzero and reproduces the exact factor.  A nonnegative
    ``shift`` is added to the diagonal before factorizing.

    Raises
    ------
    BreakdownPivot
        If a pivot becomes nonpositive; retrying with a diagonal shift
        usually helps.
    """
    if M.nrows != M.ncols:
        raise DimensionMismatch("incomplete Cholesky needs a square matrix")
    if droptol < 0:
        raise ValueError("droptol must be nonnegative")
    n = M.nrows
    diag = M.diagonal() + shift
    if np.any(diag <= 0):
        raise BreakdownPivot("matrix diagonal is not positive")

    col_rows: list[np.ndarray] = [None] * n
    col_vals: list[np.ndarray] = [None] * n
    row_links: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    diag_L = np.zeros(n)
    w = np.zeros(n)
    for j in range(n):
        cols, vals = M.row(j)  # row j == column j by symmetry
        low = cols >= j
        w[cols[low]] = vals[low]
        w[j] = diag[j]
        colnorm = np.sqrt(np.sum(vals[low & (cols > j)] ** 2) + diag[j] ** 2)
        for k, ljk in row_links[j]:
            rk = col_rows[k]
            start = np.searchsorted(rk, j)
            w[rk[start:]] -= col_vals[k][start:] * ljk
        pivot = w[j]
        if not pivot > 0:
            raise BreakdownPivot(f"nonpositive pivot {pivot:.3e} in column {j}")
        d = np.sqrt(pivot)
        below = w[j + 1:]
        nz = np.flatnonzero(below) + j + 1
        lv = w[nz] / d
        keep = np.abs(lv) >= droptol * colnorm
        nz, lv = nz[keep], lv[keep]
        # zero only the positions that might have been touched
        w[j:] = 0.0
        diag_L[j] = d
        col_rows[j], col_vals[j] = nz, lv
        for i, v in zip(nz.tolist(), lv.tolist()):
            row_links[i].append((j, v))

    rows = [np.arange(n)] + [col_rows[j] for j in range(n)]
    cols = [np.arange(n)] + [np.full(len(col_rows[j]), j) for j in range(n)]
    vals = [diag_L] + [col_vals[j] for j in range(n)]
    L = SparseMatrix.from_coo(n, n, np.concatenate(rows), np.concatenate(cols),
                              np.concatenate(vals))
    return CholeskyFactor(L, "incomplete", shift)


def cond1(M: Operand, factor: CholeskyFactor | None = None) -> float:
    """1-norm condition number of an SPD matrix, via its exact inverse."""
    A = dense(M)
    if factor is None:
        factor = dense_cholesky(A)
    inv = factor.inverse()
    return float(np.abs(A).sum(axis=0).max() * np.abs(inv).sum(axis=0).max())
