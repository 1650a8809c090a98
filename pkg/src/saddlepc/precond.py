"""Block-diagonal SPD preconditioners diag(leading, Schur) for saddle-point systems."""
from __future__ import annotations

import logging

import numpy as np

from .augmentation import AugmentedBlock
from .errors import BreakdownPivot, DimensionMismatch, NonpositiveDiagonal
from .krylov import INNER_CG_TOL, pcg
from .saddle import BlockVector
from .schur import SchurOperator, diagonal_schur, exact_schur
from .sparse import CholeskyFactor, SparseMatrix, dense_cholesky, incomplete_cholesky

log = logging.getLogger(__name__)

LEADING_KINDS = ("exact", "diagonal", "ic", "inner_cg")
IC_DROPTOL = 0.01
IC_RETRY_SHIFT = 1e-8
INNER_CG_MAXIT = 200


class LeadingSolver:
    """Approximate solve with the augmented leading block A_k."""

    kind = "exact"
    flexible = False

    def __init__(self, n: int):
        self.n = n

    def solve(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def matrix(self) -> np.ndarray:
        """Dense matrix whose inverse ``solve`` applies."""
        raise NotImplementedError


class ExactLeading(LeadingSolver):
    kind = "exact"

    def __init__(self, Ak: SparseMatrix, factor: CholeskyFactor | None = None):
        super().__init__(Ak.nrows)
        self.Ak = Ak
        self.factor = factor if factor is not None else dense_cholesky(Ak)

    def solve(self, r):
        return self.factor.solve(r)

    def matrix(self):
        return self.Ak.to_dense()


class DiagonalLeading(LeadingSolver):
    kind = "diagonal"

    def __init__(self, d):
        d = np.asarray(d, dtype=float)
        if np.any(d <= 0):
            raise NonpositiveDiagonal("diagonal approximation needs a positive diagonal")
        super().__init__(len(d))
        self.d = d

    def solve(self, r):
        return r / self.d

    def matrix(self):
        return np.diag(self.d)


class ICLeading(LeadingSolver):
    kind = "ic"

    def __init__(self, factor: CholeskyFactor):
        super().__init__(factor.n)
        self.factor = factor

    def solve(self, r):
        return self.factor.solve(r)

    def matrix(self):
        L = self.factor.dense_lower()
        return L @ L.T


class InnerCGLeading(LeadingSolver):
    """A_k^{-1} approximated by block-Jacobi preconditioned CG to a loose tolerance.

    The two diagonal blocks ``[:split]`` and ``[split:]`` of A_k are factored
    exactly.  Because the number of inner iterations varies, the resulting
    preconditioner is not a fixed linear operator.
    """

    kind = "inner_cg"
    flexible = True

    def __init__(self, Ak: SparseMatrix, split: int | None = None, tol: float = INNER_CG_TOL,
                 maxit: int = INNER_CG_MAXIT):
        n = Ak.nrows
        super().__init__(n)
        if split is None:
            split = n // 2
        if not 0 <= split <= n:
            raise ValueError(f"split index {split} outside [0, {n}]")
        self.Ak = Ak
        self.split = split
        self.tol = tol
        self.maxit = maxit
        idx = [np.arange(split), np.arange(split, n)]
        self._blocks = [(ix, dense_cholesky(Ak.submatrix(ix, ix))) for ix in idx if len(ix)]
        self.iterations: list[int] = []
        self.breaches = 0

    def block_jacobi(self, r):
        out = np.empty_like(r)
        for ix, f in self._blocks:
            out[ix] = f.solve(r[ix])
        return out

    def solve(self, r):
        rep = pcg(self.Ak.dot, self.block_jacobi, r, tol=self.tol, maxit=self.maxit)
        self.iterations.append(rep.iterations)
        if not rep.converged:
            self.breaches += 1
            log.warning("inner CG hit %d iterations (relres %.2e)", rep.iterations,
                        rep.relative_residuals[-1])
        return rep.solution

    def matrix(self):
        raise TypeError("an inner-CG leading solver has no fixed matrix")


class BlockDiagPrecond:
    """M = diag(leading, S) with ``solve`` applying M^{-1} to flat vectors."""

    def __init__(self, leading: LeadingSolver, schur: SchurOperator, name: str = ""):
        self.leading = leading
        self.schur = schur
        self.name = name or f"{leading.kind}+{schur.kind}"

    @property
    def flexible(self) -> bool:
        return self.leading.flexible

    @property
    def n(self):
        return self.leading.n

    @property
    def m(self):
        return self.schur.m

    def solve(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n + self.m,):
            raise DimensionMismatch(f"expected length {self.n + self.m}, got {v.shape}")
        return np.concatenate([self.leading.solve(v[: self.n]),
                               self.schur.apply_inverse(v[self.n:])])

    def apply_inverse(self, v: BlockVector) -> BlockVector:
        if len(v.top) != self.n or len(v.bottom) != self.m:
            raise DimensionMismatch("block vector does not match the preconditioner")
        return BlockVector(self.leading.solve(v.top), self.schur.apply_inverse(v.bottom))

    def matrix(self) -> np.ndarray:
        """Dense M (not its inverse); only for fixed preconditioners."""
        n, m = self.n, self.m
        M = np.zeros((n + m, n + m))
        M[:n, :n] = self.leading.matrix()
        M[n:, n:] = self.schur.matrix()
        return M

    def __repr__(self):
        return f"BlockDiagPrecond({self.name}, n={self.n}, m={self.m})"


def apply_inverse(P: BlockDiagPrecond, v: BlockVector) -> BlockVector:
    return P.apply_inverse(v)


def make_ideal(blk: AugmentedBlock, B: SparseMatrix) -> BlockDiagPrecond:
    """diag(A_k, B A_k^{-1} B^T), both blocks solved exactly."""
    return BlockDiagPrecond(ExactLeading(blk.Ak, blk.cholesky()), exact_schur(blk, B), "ideal")


def make_diagonal(blk: AugmentedBlock, B: SparseMatrix) -> BlockDiagPrecond:
    """diag(diag(A_k), B diag(A_k)^{-1} B^T)."""
    d = blk.Ak.diagonal()
    leading = DiagonalLeading(d)
    return BlockDiagPrecond(leading, diagonal_schur(d, B), "D")


def ic_factor(Ak: SparseMatrix, droptol: float = IC_DROPTOL) -> CholeskyFactor:
    """ICT factor of A_k, retried once with a small diagonal shift on breakdown."""
    if droptol < 0:
        raise ValueError("droptol must be nonnegative")
    try:
        return incomplete_cholesky(Ak, droptol)
    except BreakdownPivot:
        shift = IC_RETRY_SHIFT * Ak.diagonal().max()
        log.info("IC breakdown; retrying with diagonal shift %.3e", shift)
        return incomplete_cholesky(Ak, droptol, shift=shift)


def make_ic(blk: AugmentedBlock, B: SparseMatrix, droptol: float = IC_DROPTOL) -> BlockDiagPrecond:
    """diag(IC(A_k), B diag(A_k)^{-1} B^T).

    The Schur block deliberately uses diag(A_k) instead of the IC factors,
    which keeps it cheap to form.
    """
    d = blk.Ak.diagonal()
    if np.any(d <= 0):
        raise NonpositiveDiagonal("diag(A_k) must be positive")
    return BlockDiagPrecond(ICLeading(ic_factor(blk.Ak, droptol)), diagonal_schur(d, B), "IC")


def make_leading(blk: AugmentedBlock, kind: str, droptol: float = IC_DROPTOL,
                 inner_tol: float = INNER_CG_TOL, inner_maxit: int = INNER_CG_MAXIT,
                 split: int | None = None) -> LeadingSolver:
    if kind == "exact":
        return ExactLeading(blk.Ak, blk.cholesky())
    if kind == "diagonal":
        return DiagonalLeading(blk.Ak.diagonal())
    if kind == "ic":
        return ICLeading(ic_factor(blk.Ak, droptol))
    if kind == "inner_cg":
        return InnerCGLeading(blk.Ak, split, inner_tol, inner_maxit)
    raise ValueError(f"unknown leading solver kind {kind!r}; expected one of {LEADING_KINDS}")


def make_with_schur(blk: AugmentedBlock, leading_kind: str, schur_op: SchurOperator,
                    **leading_opts) -> BlockDiagPrecond:
    """Pair any leading-block solver with any Schur operator.

    ``inner_cg`` leading solvers make the preconditioner flexible, which rules
    out MINRES as the outer solver.
    """
    leading = make_leading(blk, leading_kind, **leading_opts)
    if schur_op.m is None or leading.n != blk.n:
        raise DimensionMismatch("leading block and A_k disagree")
    names = {"exact": "Akinv", "diagonal": "D", "ic": "IC", "inner_cg": "CG"}
    snames = {"exact": "S", "diagonal": "BDB", "wki": "WkI", "bfbt": "BFBT", "additive": "SCadd"}
    return BlockDiagPrecond(leading, schur_op, f"{names[leading_kind]}+{snames[schur_op.kind]}")
