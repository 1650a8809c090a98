"""Shared builders and independent oracles for the test suite."""
from __future__ import annotations

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import maximum_bipartite_matching

from saddlepc.saddle import SaddleSystem, check_wellposed
from saddlepc.sparse import SparseMatrix


def random_sparse(rng, nrows, ncols, density=0.2):
    M = rng.standard_normal((nrows, ncols)) * (rng.random((nrows, ncols)) < density)
    return SparseMatrix.from_dense(M)


def random_spd(rng, n, density=0.2):
    L = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
    return SparseMatrix.from_dense(L @ L.T + n * np.eye(n))


def sparse_saddle(seed, n=None, m=None):
    """Sparse saddle-point system whose leading block has structurally empty rows.

    A = L^T L with L touching only a subset of the variables, so augmentation
    has real structural work to do.
    """
    rng = np.random.default_rng([seed, 77])
    n = n or int(rng.integers(15, 50))
    m = m or int(rng.integers(3, n // 2))
    while True:
        active = rng.choice(n, n - int(rng.integers(1, m + 1)), replace=False)
        L = np.zeros((2 * n, n))
        for r in range(2 * n):
            cols = rng.choice(active, min(3, len(active)), replace=False)
            L[r, cols] = rng.standard_normal(len(cols))
        A = L.T @ L
        B = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.25)
        sys = SaddleSystem(SparseMatrix.from_dense(0.5 * (A + A.T)), SparseMatrix.from_dense(B))
        if check_wellposed(sys).ok:
            return sys


def pattern_rank(*mats) -> int:
    """Structural rank of the union of patterns, by scipy's matching (independent oracle)."""
    P = None
    for M in mats:
        S = scipy.sparse.csr_matrix((np.ones(M.nnz), M.col_idx, M.row_ptr), shape=M.shape)
        P = S if P is None else P + S
    match = maximum_bipartite_matching(P.tocsr(), perm_type="column")
    return int(np.sum(match >= 0))


def outer_pattern(B: SparseMatrix, rows) -> SparseMatrix:
    """Pattern of B^T W B as the union of outer products of row supports (value 1)."""
    n = B.ncols
    ri, ci = [], []
    for i in rows:
        cols, _ = B.row(i)
        ri.append(np.repeat(cols, len(cols)))
        ci.append(np.tile(cols, len(cols)))
    if not ri:
        return SparseMatrix.zeros(n, n)
    r, c = np.concatenate(ri), np.concatenate(ci)
    return SparseMatrix.from_coo(n, n, r, c, np.ones(len(r)))
