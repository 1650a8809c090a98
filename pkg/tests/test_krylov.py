import numpy as np
import pytest

from saddlepc.analysis import cluster, preconditioned_spectrum
from saddlepc.augmentation import WeightSelection, build_augmented
from saddlepc.errors import IndefiniteOperator
from saddlepc.harness.generators import GeneratorSpec, generate_banded_geo, generate_random_saddle
from saddlepc.krylov import fgmres, minres, pcg
from saddlepc.precond import InnerCGLeading, make_diagonal, make_ideal
from saddlepc.saddle import BlockVector
from saddlepc.sparse import SparseMatrix, dense_cholesky

from _support import random_spd


def ideal_setup(n, m, k, seed):
    s = generate_random_saddle(GeneratorSpec(n, m, k), seed)
    blk = build_augmented(s.A, s.B, WeightSelection.partial(range(k), m))
    return s, blk, make_ideal(blk, s.B)


# ----------------------------------------------------------------- MINRES
def test_minres_zero_rhs():
    s, _, P = ideal_setup(20, 5, 1, 0)
    rep = minres(s.matvec, P, np.zeros(s.size))
    assert rep.iterations == 0 and rep.converged and not rep.solution.any()


def test_minres_ideal_four_eigenvalues():
    s, _, P = ideal_setup(40, 12, 3, 1)
    b = s.matvec(np.random.default_rng(0).standard_normal(s.size))
    rep = minres(s.matvec, P, b, tol=1e-10)
    assert rep.converged and rep.iterations <= 6
    assert len(rep.relative_residuals) == rep.iterations + 1
    assert rep.true_relative_residual <= 10 * 1e-10


def test_minres_ideal_maximal_nullity():
    s = generate_random_saddle(GeneratorSpec(30, 10, 10), 2)
    blk = build_augmented(s.A, s.B, WeightSelection.full(10))
    b = s.matvec(np.ones(s.size))
    rep = minres(s.matvec, make_ideal(blk, s.B), b, tol=1e-10)
    assert rep.converged and rep.iterations <= 3


def test_minres_block_vector_input():
    s, _, P = ideal_setup(20, 5, 2, 3)
    x = np.random.default_rng(1).standard_normal(s.size)
    b = BlockVector.from_flat(s.matvec(x), s.n)
    rep = minres(s.matvec, P, b, tol=1e-12)
    assert isinstance(rep.solution, BlockVector)
    assert np.allclose(rep.solution.flat(), x, atol=1e-8)


def test_minres_monotone_and_backstop():
    for seed in range(5):
        s = generate_random_saddle(GeneratorSpec(40, 10, 3), seed)
        blk = build_augmented(s.A, s.B, WeightSelection.partial(range(3), 10))
        P = make_diagonal(blk, s.B)
        b = s.matvec(np.random.default_rng(seed).standard_normal(s.size))
        rep = minres(s.matvec, P, b, tol=1e-8)
        assert np.all(np.diff(rep.relative_residuals) <= 1e-12)
        if rep.converged:
            assert np.linalg.norm(b - s.matvec(rep.solution)) / np.linalg.norm(b) <= 10 * 1e-8


def test_minres_iterations_bounded_by_clusters():
    for seed in range(4):
        n, m = 30 + 10 * seed, 8 + seed
        k = seed + 1
        s, _, P = ideal_setup(n, m, k, 10 + seed)
        clusters = preconditioned_spectrum(s, P).clusters
        b = s.matvec(np.random.default_rng(seed).standard_normal(s.size))
        rep = minres(s.matvec, P, b, tol=1e-10)
        assert rep.iterations <= len(clusters) + 2


def test_minres_max_iterations_report():
    s, blk, _ = ideal_setup(40, 10, 3, 4)
    rep = minres(s.matvec, make_diagonal(blk, s.B), np.ones(s.size), tol=1e-14, maxit=3)
    assert not rep.converged and rep.iterations == 3 and rep.status == "max iterations"


def test_minres_rejects_flexible():
    s, blk, _ = ideal_setup(20, 5, 1, 5)
    from saddlepc.precond import make_with_schur
    from saddlepc.schur import exact_schur
    P = make_with_schur(blk, "inner_cg", exact_schur(blk, s.B))
    with pytest.raises(ValueError):
        minres(s.matvec, P, np.ones(s.size))


def test_minres_unpreconditioned_matches_dense_solve():
    s, _, _ = ideal_setup(20, 5, 0, 6)
    b = np.random.default_rng(2).standard_normal(s.size)
    rep = minres(s.matvec, None, b, tol=1e-12, maxit=500)
    assert np.allclose(rep.solution, np.linalg.solve(s.assemble_dense(), b), atol=1e-8)


# ----------------------------------------------------------------- PCG
def test_pcg_identity_and_jacobi():
    b = np.arange(1.0, 6.0)
    assert pcg(lambda v: v, None, b, tol=1e-12).iterations == 1
    d = np.array([1.0, 4.0, 9.0, 2.0, 3.0])
    rep = pcg(lambda v: d * v, lambda r: r / d, b, tol=1e-12)
    assert rep.iterations == 1 and np.allclose(rep.solution, b / d)


def test_pcg_indefinite():
    M = np.diag([1.0, -1.0])
    with pytest.raises(IndefiniteOperator):
        pcg(lambda v: M @ v, None, np.array([1.0, 1.0]), tol=1e-12)


def _reference_pcg(M, Pinv, b, tol):
    """Textbook PCG on dense arrays; an independent iteration count."""
    x = np.zeros_like(b)
    r = b.copy()
    z = Pinv @ r
    p = z.copy()
    rz = r @ z
    for it in range(1, 10 * len(b)):
        Mp = M @ p
        alpha = rz / (p @ Mp)
        x += alpha * p
        r -= alpha * Mp
        if np.linalg.norm(r) <= tol * np.linalg.norm(b):
            return it
        z = Pinv @ r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return it


def test_pcg_block_jacobi_matches_reference():
    s = generate_banded_geo(GeneratorSpec(120, 48, 0, "banded-geo"), 0)
    blk = build_augmented(s.A, s.B, WeightSelection.full(48))
    lead = InnerCGLeading(blk.Ak, split=48, tol=0.1)
    b = np.random.default_rng(3).standard_normal(120)
    rep = pcg(blk.Ak.dot, lead.block_jacobi, b, tol=0.1)
    Ad = blk.Ak.to_dense()
    Pinv = np.zeros_like(Ad)
    Pinv[:48, :48] = np.linalg.inv(Ad[:48, :48])
    Pinv[48:, 48:] = np.linalg.inv(Ad[48:, 48:])
    ref = _reference_pcg(Ad, Pinv, b, 0.1)
    assert rep.converged and rep.iterations < 120
    assert 0.5 * ref <= rep.iterations <= 1.5 * ref


# ----------------------------------------------------------------- FGMRES
def test_fgmres_exact_preconditioner_one_iteration():
    S = random_spd(np.random.default_rng(4), 12)
    F = dense_cholesky(S)
    b = np.random.default_rng(5).standard_normal(12)
    rep = fgmres(S.dot, F.solve, b, tol=1e-10)
    assert rep.iterations == 1 and rep.converged


def test_fgmres_zero_rhs():
    rep = fgmres(lambda v: v, None, np.zeros(4))
    assert rep.iterations == 0 and rep.converged


def test_fgmres_nonsymmetric_with_restart():
    rng = np.random.default_rng(6)
    M = np.eye(60) * 4 + rng.standard_normal((60, 60)) * 0.3
    b = rng.standard_normal(60)
    rep = fgmres(lambda v: M @ v, None, b, tol=1e-10, restart=5, maxit=2000)
    assert rep.converged
    assert np.linalg.norm(M @ rep.solution - b) <= 1e-9 * np.linalg.norm(b)


def test_fgmres_with_inner_cg_preconditioner():
    s = generate_banded_geo(GeneratorSpec(60, 24, 0, "banded-geo"), 1)
    blk = build_augmented(s.A, s.B, WeightSelection.full(24))
    from saddlepc.precond import make_with_schur
    from saddlepc.schur import bfbt_operator
    bf = bfbt_operator(s.A, s.B, blk.selection)
    P = make_with_schur(blk, "inner_cg", bf, split=24)
    b = s.matvec(np.ones(s.size))
    rep = fgmres(s.matvec, P, b, tol=1e-8)
    assert rep.converged
    assert np.linalg.norm(b - s.matvec(rep.solution)) <= 10 * 1e-8 * np.linalg.norm(b)
    exact = minres(s.matvec, make_with_schur(blk, "exact", bf), b, tol=1e-8)
    assert rep.iterations <= 2.5 * exact.iterations


def test_clusters_helper():
    assert [c.multiplicity for c in cluster([1.0, 1.0 + 1e-12, 2.0])] == [2, 1]


def test_report_seconds_per_iteration():
    s, _, P = ideal_setup(20, 5, 1, 7)
    rep = minres(s.matvec, P, np.ones(s.size))
    assert rep.seconds >= 0 and rep.seconds_per_iteration >= 0
    assert isinstance(SparseMatrix.identity(1), SparseMatrix)
