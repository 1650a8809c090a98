"""Schur complement operators for the augmented system.

Every operator here exposes ``apply_inverse``, the action of (an
approximation of) S_k^{-1} where S_k = B A_k^{-1} B^T.  The WkI and BFBT
approximations are *direct* approximations of the inverse, so applying them
is a multiply rather than a solve.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .augmentation import AugmentedBlock, WeightSelection
from .errors import DimensionMismatch, NonpositiveDiagonal, NotPositiveDefinite, RankDeficientB, \
    SingularReducedHessian
from .saddle import numerical_rank
from .sparse import CholeskyFactor, SparseMatrix, dense, dense_cholesky

SCHUR_KINDS = ("exact", "diagonal", "wki", "bfbt", "additive")


@dataclass(frozen=True)
class NullspaceBasis:
    """Orthonormal basis Z (n x (n-m)) of ker(B)."""

    Z: np.ndarray


def nullspace_basis(B: SparseMatrix) -> NullspaceBasis:
    Bd = dense(B)
    m, n = Bd.shape
    if numerical_rank(Bd, max(m, n)) < m:
        raise RankDeficientB("B does not have full row rank")
    _, _, Vt = np.linalg.svd(Bd, full_matrices=True)
    return NullspaceBasis(Vt[m:].T.copy())


class SchurOperator:
    """SPD operator standing in for S_k^{-1}.

    Parameters
    ----------
    kind : one of ``exact``, ``diagonal``, ``wki``, ``bfbt``, ``additive``
    apply_inverse : callable mapping a length-m vector to a length-m vector
    m : dimension
    beta : shift of the WkI approximation (zero otherwise)
    schur_matrix : the m x m matrix that ``apply_inverse`` inverts, when it is
        formed explicitly (exact and diagonal kinds)
    """

    def __init__(self, kind: str, apply_inverse: Callable[[np.ndarray], np.ndarray], m: int,
                 beta: float = 0.0, schur_matrix: np.ndarray | None = None):
        if kind not in SCHUR_KINDS:
            raise ValueError(f"unknown Schur operator kind {kind!r}")
        if kind == "wki" and not beta > 0:
            raise ValueError("WkI needs beta > 0")
        self.kind = kind
        self._apply = apply_inverse
        self.m = m
        self.beta = beta
        self.schur_matrix = schur_matrix

    def apply_inverse(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.m:
            raise DimensionMismatch(f"Schur operator is {self.m}-dimensional, got {r.shape}")
        return self._apply(r)

    __call__ = apply_inverse

    def inverse_matrix(self) -> np.ndarray:
        """Dense m x m matrix of ``apply_inverse``."""
        I = np.eye(self.m)
        M = np.column_stack([self._apply(I[:, j]) for j in range(self.m)])
        return 0.5 * (M + M.T)

    def matrix(self) -> np.ndarray:
        """Dense approximation of S_k itself."""
        if self.schur_matrix is not None:
            return self.schur_matrix
        S = np.linalg.inv(self.inverse_matrix())
        return 0.5 * (S + S.T)

    def __repr__(self):
        extra = f", beta={self.beta}" if self.kind == "wki" else ""
        return f"SchurOperator({self.kind}, m={self.m}{extra})"


def _solve_operator(kind: str, S: np.ndarray) -> SchurOperator:
    S = 0.5 * (S + S.T)
    factor = dense_cholesky(S)
    return SchurOperator(kind, factor.solve, S.shape[0], schur_matrix=S)


def exact_schur(blk: AugmentedBlock, B: SparseMatrix) -> SchurOperator:
    """S_k = B A_k^{-1} B^T, formed densely and Cholesky factored."""
    if B.ncols != blk.n:
        raise DimensionMismatch("B and A_k disagree in size")
    X = blk.cholesky().solve(B.T.to_dense())
    return _solve_operator("exact", B.dot(X))


def diagonal_schur(Ak_diag: np.ndarray, B: SparseMatrix) -> SchurOperator:
    """B diag(A_k)^{-1} B^T, formed densely and Cholesky factored."""
    d = np.asarray(Ak_diag, dtype=float)
    if np.any(d <= 0):
        raise NonpositiveDiagonal("diag(A_k) must be positive")
    Bd = B.to_dense()
    return _solve_operator("diagonal", (Bd / d) @ Bd.T)


def schur_inverse_additive(A: SparseMatrix, B: SparseMatrix, sel: WeightSelection,
                           Z: NullspaceBasis | None = None) -> np.ndarray:
    """W_k + (BB^T)^{-1} B (A - AVA) B^T (BB^T)^{-1},  V = Z (Z^T A Z)^{-1} Z^T.

    This equals S_k^{-1} whenever rank(W_k) = nullity(A); the caller is
    responsible for that condition.
    """
    if Z is None:
        Z = nullspace_basis(B)
    Ad, Bd = dense(A), dense(B)
    m = Bd.shape[0]
    Zm = Z.Z
    R = Zm.T @ Ad @ Zm
    if Zm.shape[1] and numerical_rank(R) < R.shape[0]:
        raise SingularReducedHessian("Z^T A Z is singular")
    AZ = Ad @ Zm
    AVA = AZ @ np.linalg.solve(R, AZ.T) if Zm.shape[1] else np.zeros_like(Ad)
    BBt = dense_cholesky(Bd @ Bd.T)
    P = BBt.solve(Bd)  # (BB^T)^{-1} B
    out = P @ (Ad - AVA) @ P.T
    out = 0.5 * (out + out.T)
    out[np.diag_indices(m)] += sel.weights(m)
    return out


def wki_operator(sel: WeightSelection, beta: float, m: int) -> SchurOperator:
    """S_k^{-1} ≈ W_k + beta I."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    d = sel.weights(m) + beta
    return SchurOperator("wki", lambda r: d * r if r.ndim == 1 else d[:, None] * r, m, beta=beta)


def bfbt_operator(A: SparseMatrix, B: SparseMatrix, sel: WeightSelection,
                  BBt_factor: CholeskyFactor | None = None) -> SchurOperator:
    """S_k^{-1} ≈ W_k + (BB^T)^{-1} B A B^T (BB^T)^{-1}.

    One Cholesky factorization of BB^T is cached and reused by both solves.
    """
    m = B.nrows
    Bt = B.T
    if BBt_factor is None:
        Bd = B.to_dense()
        try:
            BBt_factor = dense_cholesky(Bd @ Bd.T)
        except NotPositiveDefinite:
            raise NotPositiveDefinite("BB^T is singular; B is rank deficient") from None
    w = sel.weights(m)

    def apply(r):
        t = BBt_factor.solve(r)
        u = B.dot(A.dot(Bt.dot(t)))
        return w * r + BBt_factor.solve(u)

    return SchurOperator("bfbt", apply, m)
