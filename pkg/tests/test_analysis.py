import numpy as np
import pytest
import scipy.linalg

from saddlepc.analysis import (GOLDEN_MINUS, GOLDEN_PLUS, congruent_operator, interval_distance,
                               jacobi_eigh, lower_bound, pencil_spectrum, preconditioned_spectrum,
                               verify_all, verify_four_eig, verify_identities,
                               verify_interval_bounds, verify_lower_bound, verify_two_eig)
from saddlepc.augmentation import AugmentedBlock, WeightSelection, build_augmented
from saddlepc.harness.generators import GeneratorSpec, generate_random_saddle
from saddlepc.precond import make_diagonal, make_ideal
from saddlepc.saddle import SaddleSystem
from saddlepc.sparse import SparseMatrix

S = SparseMatrix.from_dense


# ----------------------------------------------------------------- Jacobi
def test_jacobi_examples():
    assert np.allclose(jacobi_eigh(np.diag([3.0, 1.0, 2.0])), [1.0, 2.0, 3.0])
    assert np.allclose(jacobi_eigh([[0.0, 1.0], [1.0, 0.0]]), [-1.0, 1.0])


@pytest.mark.parametrize("seed", range(5))
def test_jacobi_random_against_lapack(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 30))
    M = X + X.T
    w, V = jacobi_eigh(M, vectors=True)
    assert abs(w.sum() - np.trace(M)) <= 1e-10 * np.linalg.norm(M)
    assert np.allclose(w, np.linalg.eigvalsh(M), atol=1e-10 * np.linalg.norm(M))
    assert np.linalg.norm(M @ V - V * w) <= 1e-10 * np.linalg.norm(M)
    assert np.allclose(V.T @ V, np.eye(30), atol=1e-12)


def test_jacobi_odd_dimension_and_validation():
    M = np.random.default_rng(9).standard_normal((7, 7))
    M = M + M.T
    assert np.allclose(jacobi_eigh(M), np.linalg.eigvalsh(M))
    with pytest.raises(ValueError):
        jacobi_eigh(np.zeros((501, 501)))
    with pytest.raises(ValueError):
        jacobi_eigh([[0.0, 1.0], [0.0, 0.0]])


# ----------------------------------------------------------------- spectra
def test_identity_preconditioner_gives_spectrum_of_K():
    s = generate_random_saddle(GeneratorSpec(12, 3, 0), 0)
    blk = AugmentedBlock(SparseMatrix.identity(12), WeightSelection.partial([], 3))
    P = make_ideal(blk, s.B)
    # ideal Schur block here is B B^T, so compare against the pencil instead of eig(K)
    assert np.allclose(preconditioned_spectrum(s, P).eigenvalues, np.sort(pencil_spectrum(s, P)))
    from saddlepc.precond import BlockDiagPrecond, DiagonalLeading
    from saddlepc.schur import SchurOperator
    ident = BlockDiagPrecond(DiagonalLeading(np.ones(12)),
                             SchurOperator("diagonal", lambda r: r, 3, schur_matrix=np.eye(3)),
                             "identity")
    assert np.allclose(preconditioned_spectrum(s, ident).eigenvalues,
                       np.linalg.eigvalsh(s.assemble_dense()), atol=1e-10)


def test_two_by_two_golden_ratio():
    s = SaddleSystem(SparseMatrix.diag([2.0, 3.0]), S([[1.0, 0.0]]))
    blk = build_augmented(s.A, s.B, WeightSelection.partial([], 1))
    ev = preconditioned_spectrum(s, make_ideal(blk, s.B)).eigenvalues
    assert np.allclose(ev, [GOLDEN_MINUS, 1.0, GOLDEN_PLUS], atol=1e-14)


def test_clusters_for_partial_augmentation():
    s = generate_random_saddle(GeneratorSpec(40, 12, 3), 0)
    blk = build_augmented(s.A, s.B, WeightSelection.partial(range(3), 12))
    rep = preconditioned_spectrum(s, make_ideal(blk, s.B))
    got = {round(c.center, 6): c.multiplicity for c in rep.clusters}
    assert got == {-1.0: 3, 1.0: 31, round(GOLDEN_MINUS, 6): 9, round(GOLDEN_PLUS, 6): 9}
    assert sum(c.multiplicity for c in rep.clusters) == 52


@pytest.mark.parametrize("seed", range(3))
def test_congruence_matches_pencil(seed):
    s = generate_random_saddle(GeneratorSpec(25, 7, 2), seed)
    blk = build_augmented(s.A, s.B, WeightSelection.partial(range(2), 7))
    for P in (make_ideal(blk, s.B), make_diagonal(blk, s.B)):
        a = preconditioned_spectrum(s, P).eigenvalues
        b = np.sort(pencil_spectrum(s, P))
        assert np.max(np.abs(a - b)) <= 1e-10 * np.abs(b).max()


def test_congruent_operator_similar_to_preconditioned():
    s = generate_random_saddle(GeneratorSpec(15, 4, 1), 1)
    blk = build_augmented(s.A, s.B, WeightSelection.partial([0], 4))
    P = make_diagonal(blk, s.B)
    C = congruent_operator(s, P)
    ref = np.sort(scipy.linalg.eigvals(np.linalg.solve(P.matrix(), s.assemble_dense())).real)
    assert np.allclose(np.linalg.eigvalsh(C), ref, atol=1e-9)


def test_near_diagonal_diagonal_preconditioner_clusters():
    rng = np.random.default_rng(0)
    n, m = 60, 15
    d = rng.uniform(1.0, 2.0, n)
    d[:m // 3] = 0.0
    E = 1e-3 * rng.standard_normal((n, n))
    A = np.diag(d) + (E + E.T) * (d[:, None] > 0) * (d[None, :] > 0)
    B = np.zeros((m, n))
    B[np.arange(m), rng.permutation(n)[:m]] = 1.0
    B[np.arange(m), rng.permutation(n)[:m]] += 0.05
    B[np.arange(m // 3), np.arange(m // 3)] = 1.0
    s = SaddleSystem(S(A), S(B))
    blk = build_augmented(s.A, s.B, WeightSelection.partial(range(m // 3), m))
    rep = preconditioned_spectrum(s, make_diagonal(blk, s.B))
    assert rep.fraction_near([1.0, GOLDEN_MINUS, GOLDEN_PLUS, -1.0], 0.1) >= 0.6


# ----------------------------------------------------------------- verdicts
def test_four_eig_verdicts():
    s = generate_random_saddle(GeneratorSpec(30, 8, 0), 1)
    v = verify_four_eig(s, WeightSelection.partial([], 8))
    assert v.passed and v.extra["counts"][GOLDEN_MINUS] == 8
    s = generate_random_saddle(GeneratorSpec(50, 15, 5), 2)
    v = verify_four_eig(s, WeightSelection.partial(range(5), 15))
    assert v.passed and v.extra["counts"] == {-1.0: 5, 1.0: 40, GOLDEN_MINUS: 10, GOLDEN_PLUS: 10}
    assert not verify_four_eig(s, WeightSelection.partial(range(3), 15)).applicable


def test_two_eig_verdict():
    s = generate_random_saddle(GeneratorSpec(20, 6, 6), 3)
    assert verify_two_eig(s).passed
    assert not verify_two_eig(generate_random_saddle(GeneratorSpec(20, 6, 2), 3)).applicable


def test_interval_distance():
    assert interval_distance([-1.0, 1.0, GOLDEN_PLUS, -0.7]).tolist() == [0.0, 0.0, 0.0, 0.0]
    assert interval_distance([0.0])[0] == pytest.approx(-GOLDEN_MINUS)
    assert interval_distance([2.0])[0] == pytest.approx(2.0 - GOLDEN_PLUS)


def test_interval_bounds_for_larger_W():
    s = generate_random_saddle(GeneratorSpec(30, 8, 2), 4)
    for r in (2, 5, 8):
        assert verify_interval_bounds(s, WeightSelection.partial(range(r), 8)).passed


def test_identities_verdicts():
    s = generate_random_saddle(GeneratorSpec(20, 6, 6), 5)
    verdicts = {v.name: v for v in verify_identities(s, WeightSelection.full(6))}
    assert all(v.passed for v in verdicts.values())
    s = generate_random_saddle(GeneratorSpec(20, 6, 2), 5)
    verdicts = {v.name: v for v in verify_identities(s, WeightSelection.partial(range(2), 6))}
    assert verdicts["kw_identity"].passed and verdicts["commute"].passed and verdicts["sc_add"].passed
    assert not verdicts["mrd_schur"].applicable and not verdicts["wishlist"].applicable


def test_lower_bound_examples():
    s = SaddleSystem(SparseMatrix.diag([1.0, 0.0]), S([[0.0, 1.0]]))
    assert lower_bound(s)["bound"] == pytest.approx(1.0)
    s = SaddleSystem(SparseMatrix.diag([1.0, 0.0]), S([[0.0, 0.5]]))
    assert lower_bound(s)["bound"] == pytest.approx(0.5)
    v = verify_lower_bound(generate_random_saddle(GeneratorSpec(20, 6, 6), 6))
    assert v.passed and v.extra["min_positive"] >= v.extra["bound"]
    assert not verify_lower_bound(generate_random_saddle(GeneratorSpec(20, 6, 1), 6)).applicable


def test_verify_all_rows():
    s = generate_random_saddle(GeneratorSpec(20, 6, 6), 7)
    rows = [v.as_row() for v in verify_all(s, WeightSelection.full(6))]
    assert len(rows) == 9 and all(r["passed"] for r in rows if r["applicable"])
