"""The symmetric saddle-point matrix K = [[A, B^T], [B, 0]]."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch
from .sparse import EPS, SparseMatrix, as_vector, dense, spmv, transpose

log = logging.getLogger(__name__)

SYMMETRY_WARN_RTOL = 1e-12


@dataclass(frozen=True)
class BlockVector:
    """A vector split conformally with K: ``top`` has length n, ``bottom`` m."""

    top: np.ndarray
    bottom: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "top", as_vector(self.top))
        object.__setattr__(self, "bottom", as_vector(self.bottom))

    @classmethod
    def from_flat(cls, v, n: int) -> "BlockVector":
        v = np.asarray(v, dtype=float)
        return cls(v[:n], v[n:])

    @classmethod
    def zeros(cls, n: int, m: int) -> "BlockVector":
        return cls(np.zeros(n), np.zeros(m))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.top, self.bottom])

    def norm(self) -> float:
        return float(np.hypot(np.linalg.norm(self.top), np.linalg.norm(self.bottom)))


class WellPosedness(NamedTuple):
    B_full_rank: bool
    kernels_disjoint: bool
    nullity_A: int

    @property
    def ok(self) -> bool:
        return self.B_full_rank and self.kernels_disjoint


def numerical_rank(M, dim: int | None = None) -> int:
    """Rank by SVD with the cutoff ``dim * eps * sigma_max``.

    ``dim`` defaults to the larger dimension of ``M``.
    """
    M = dense(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if dim is None:
        dim = max(M.shape)
    return int(np.sum(s > dim * EPS * s[0])) if s[0] > 0 else 0


class SaddleSystem:
    """Pair (A, B) defining K, with A symmetric PSD (n x n) and B (m x n), m < n.

    A is symmetrized on construction; a warning is emitted when that changes
    it by more than 1e-12 relative.
    """

    def __init__(self, A: SparseMatrix, B: SparseMatrix):
        if not isinstance(A, SparseMatrix):
            A = SparseMatrix.from_dense(A)
        if not isinstance(B, SparseMatrix):
            B = SparseMatrix.from_dense(B)
        n, m = A.nrows, B.nrows
        if A.ncols != n:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.ncols != n:
            raise DimensionMismatch(f"B has {B.ncols} columns, A has {n}")
        if not m < n:
            raise DimensionMismatch(f"need m < n, got m={m}, n={n}")
        At = transpose(A)
        if At != A:
            diff = (A - At).max_abs()
            if diff > SYMMETRY_WARN_RTOL * A.max_abs():
                warnings.warn(f"A is not symmetric (max |A - A^T| = {diff:.3e}); symmetrizing",
                              stacklevel=2)
            A = (A + At).scale(0.5)
        self.A = A
        self.B = B
        self.Bt = transpose(B)
        self.n = n
        self.m = m

    @property
    def size(self) -> int:
        return self.n + self.m

    def matvec(self, v) -> np.ndarray:
        """K applied to a flat vector of length n+m."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.size,):
            raise DimensionMismatch(f"expected length {self.size}, got {v.shape}")
        x, y = v[: self.n], v[self.n:]
        return np.concatenate([spmv(self.A, x) + spmv(self.Bt, y), spmv(self.B, x)])

    def apply_K(self, v: BlockVector) -> BlockVector:
        if len(v.top) != self.n or len(v.bottom) != self.m:
            raise DimensionMismatch(
                f"block vector ({len(v.top)}, {len(v.bottom)}) vs system ({self.n}, {self.m})")
        return BlockVector(spmv(self.A, v.top) + spmv(self.Bt, v.bottom), spmv(self.B, v.top))

    def assemble_dense(self) -> np.ndarray:
        n = self.n
        K = np.zeros((self.size, self.size))
        K[:n, :n] = self.A.to_dense()
        Bd = self.B.to_dense()
        K[n:, :n] = Bd
        K[:n, n:] = Bd.T
        return K

    def check_wellposed(self) -> WellPosedness:
        return check_wellposed(self)

    def __repr__(self):
        return f"SaddleSystem(n={self.n}, m={self.m}, nnz(A)={self.A.nnz}, nnz(B)={self.B.nnz})"


def apply_K(sys: SaddleSystem, v: BlockVector) -> BlockVector:
    return sys.apply_K(v)


def assemble_dense(sys: SaddleSystem) -> np.ndarray:
    return sys.assemble_dense()


def check_wellposed(sys: SaddleSystem) -> WellPosedness:
    """Report full row rank of B, ker(A) ∩ ker(B) = {0} and the nullity of A."""
    dim = max(sys.n, sys.m)
    Ad, Bd = sys.A.to_dense(), sys.B.to_dense()
    rank_B = numerical_rank(Bd, dim)
    rank_stack = numerical_rank(np.vstack([Ad, Bd]), dim)
    nullity = sys.n - numerical_rank(Ad, dim)
    return WellPosedness(rank_B == sys.m, rank_stack == sys.n, nullity)
