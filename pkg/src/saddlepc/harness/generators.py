"""Seeded synthetic problems.

All generators draw from ``numpy.random.default_rng`` (PCG64) and are
bit-for-bit deterministic given the seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GenerationFailure
from ..ipm import QpProblem
from ..saddle import SaddleSystem, check_wellposed
from ..sparse import SparseMatrix

RNG_NAME = "PCG64"
GENERATOR_KINDS = ("random-saddle", "aligned-saddle", "banded-geo", "degenerate-lp", "lp", "qp")
MAX_RETRIES = 20


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    m: int
    k: int = 0
    kind: str = "random-saddle"
    bandwidth: int = 3

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not 0 <= self.k <= self.m < self.n:
            raise ValueError(f"need 0 <= k <= m < n, got k={self.k}, m={self.m}, n={self.n}")


def _rng(seed, attempt=0):
    return np.random.default_rng([int(seed), attempt])


def _orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _sym_sparse(M):
    return SparseMatrix.from_dense(0.5 * (M + M.T))


def generate_random_saddle(spec: GeneratorSpec, seed: int) -> SaddleSystem:
    """A = Q diag(d) Q^T with exactly k zeros in d, B Gaussian.

    The nonzero entries of d are log-uniform in [0.1, 10].  Draws are
    repeated with a derived seed until the system is well posed.
    """
    n, m, k = spec.n, spec.m, spec.k
    for attempt in range(MAX_RETRIES):
        rng = _rng(seed, attempt)
        Q = _orthogonal(rng, n)
        d = np.concatenate([np.zeros(k), 10.0 ** rng.uniform(-1.0, 1.0, n - k)])
        A = (Q * d) @ Q.T
        B = rng.standard_normal((m, n))
        sys = SaddleSystem(_sym_sparse(A), SparseMatrix.from_dense(B))
        wp = check_wellposed(sys)
        if wp.ok and wp.nullity_A == k:
            return sys
    raise GenerationFailure(f"no well-posed system after {MAX_RETRIES} draws")


def generate_aligned_saddle(n: int, m: int, seed: int) -> SaddleSystem:
    """Maximal-nullity system whose kernel of A is exactly range(B^T).

    Then B A = 0, so A - AVA = 0 and the BFBT approximation is exact.
    """
    rng = _rng(seed)
    Q = _orthogonal(rng, n)
    N, R = Q[:, :m], Q[:, m:]
    d = 10.0 ** rng.uniform(-1.0, 1.0, n - m)
    A = (R * d) @ R.T
    C = _orthogonal(rng, m) * 10.0 ** rng.uniform(-0.5, 0.5, m)
    B = C @ N.T
    return SaddleSystem(_sym_sparse(A), SparseMatrix.from_dense(B))


def generate_banded_geo(spec: GeneratorSpec, seed: int, beta: float = 1e-3,
                        obs_stride: int = 4) -> SaddleSystem:
    """Synthetic stand-in for a regularized inverse problem.

    Unknowns are ordered as (field u of size m, model of size n-m) and
    B = [T  G] with T a banded, diagonally dominant m x m operator and G a
    banded m x (n-m) coupling.  The leading block is
    diag(observation mask, beta * D^T D) with D a first-difference matrix, so
    it has high nullity.  Both BB^T and the two diagonal blocks of A + B^T B
    are banded.
    """
    n, m, bw = spec.n, spec.m, spec.bandwidth
    p = n - m
    if not (0 <= bw < p and bw < m):
        raise ValueError(f"bandwidth {bw} must be below both m={m} and n-m={p}")
    h = bw // 2
    rng = _rng(seed)
    rows, cols, vals = [], [], []
    for i in range(m):
        rows.append(i)
        cols.append(i)
        vals.append(4.0 + rng.uniform(-0.5, 0.5))
        for off in range(1, h + 1):
            for j in (i - off, i + off):
                if 0 <= j < m:
                    rows.append(i)
                    cols.append(j)
                    vals.append(-rng.uniform(0.5, 1.0) / off)
    centers = np.rint(np.arange(p) * (m - 1) / max(p - 1, 1)).astype(int)
    for j, r in enumerate(centers):
        for i in range(max(r - h, 0), min(r + h, m - 1) + 1):
            rows.append(i)
            cols.append(m + j)
            vals.append(rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0]))
    B = SparseMatrix.from_coo(m, n, rows, cols, vals)

    obs = np.zeros(n)
    obs[np.arange(0, m, obs_stride)] = 1.0
    D = np.diff(np.eye(p), axis=0)
    reg = beta * (D.T @ D)
    A = SparseMatrix.diag(obs) + SparseMatrix.from_coo(
        n, n, *_shifted_triplets(SparseMatrix.from_dense(reg), m))
    sys = SaddleSystem(A, B)
    if not check_wellposed(sys).ok:
        raise GenerationFailure("banded generator produced a singular saddle-point matrix")
    return sys


def _shifted_triplets(M: SparseMatrix, offset: int):
    return M.row_indices() + offset, M.col_idx + offset, M.values


def generate(spec: GeneratorSpec, seed: int) -> SaddleSystem:
    if spec.kind == "random-saddle":
        return generate_random_saddle(spec, seed)
    if spec.kind == "aligned-saddle":
        return generate_aligned_saddle(spec.n, spec.m, seed)
    if spec.kind == "banded-geo":
        return generate_banded_geo(spec, seed)
    raise ValueError(f"{spec.kind!r} does not describe a saddle-point system")


# ----------------------------------------------------------------- LP / QP
def _optimal_pair(rng, n, m, spread):
    """Complementary optimal x*, z* with m basic columns."""
    basis = np.sort(rng.choice(n, m, replace=False))
    x = np.zeros(n)
    z = 10.0 ** rng.uniform(-spread, spread, n)
    x[basis] = 10.0 ** rng.uniform(-spread, spread, m)
    z[basis] = 0.0
    return x, z, basis


def generate_lp(n: int, m: int, seed: int, degenerate: bool = False, spread: float = 1.0) -> QpProblem:
    """Standard-form LP with a known optimal vertex.

    With ``degenerate`` a quarter of the nonbasic columns duplicate basic ones
    (same cost, so the optimal face is not a vertex) and two basic variables
    are zero at the optimum.
    """
    for attempt in range(MAX_RETRIES):
        rng = _rng(seed, attempt)
        J = rng.standard_normal((m, n))
        x, z, basis = _optimal_pair(rng, n, m, spread)
        y = rng.standard_normal(m)
        if degenerate:
            nonbasic = np.setdiff1d(np.arange(n), basis)
            dups = rng.choice(nonbasic, max(len(nonbasic) // 4, 1), replace=False)
            for j in dups:
                src = rng.choice(basis)
                J[:, j] = J[:, src]
                z[j] = 0.0
            x[rng.choice(basis, 2, replace=False)] = 0.0
        b = J @ x
        c = J.T @ y + z
        try:
            return QpProblem.lp(J, b, c, name=f"{'degenerate-' if degenerate else ''}lp{n}x{m}")
        except ValueError:
            continue
    raise GenerationFailure("could not draw a full-rank constraint matrix")


def generate_qp(n: int, m: int, seed: int, hessian_rank: int | None = None) -> QpProblem:
    """Convex QP with a rank-deficient sparse Hessian and a known optimum."""
    rng = _rng(seed)
    r = n // 3 if hessian_rank is None else hessian_rank
    L = np.zeros((r, n))
    for i in range(r):
        cols = rng.choice(n, 3, replace=False)
        L[i, cols] = rng.standard_normal(3)
    H = L.T @ L
    J = rng.standard_normal((m, n))
    x, z, _ = _optimal_pair(rng, n, m, 1.0)
    y = rng.standard_normal(m)
    c = J.T @ y + z - H @ x
    return QpProblem(_sym_sparse(H), SparseMatrix.from_dense(J), J @ x, c, name=f"qp{n}x{m}")
