import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddlepc.augmentation import WeightSelection, build_augmented
from saddlepc.errors import NotPositiveDefinite, RankDeficientB, SingularReducedHessian
from saddlepc.harness.generators import GeneratorSpec, generate_aligned_saddle, generate_random_saddle
from saddlepc.schur import (SchurOperator, bfbt_operator, diagonal_schur, exact_schur,
                            nullspace_basis, schur_inverse_additive, wki_operator)
from saddlepc.sparse import SparseMatrix

S = SparseMatrix.from_dense


def rank_k_selection(sys, k):
    """First k rows; generic for Gaussian B."""
    return WeightSelection.partial(range(k), sys.m)


# ----------------------------------------------------------------- null space
def test_nullspace_examples():
    Z = nullspace_basis(S([[1.0, 0.0]])).Z
    assert np.allclose(np.abs(Z), [[0.0], [1.0]])
    B = S(np.hstack([np.eye(2), np.zeros((2, 2))]))
    Z = nullspace_basis(B).Z
    assert np.allclose(np.abs(Z[:2]), 0) and np.allclose(np.abs(Z.T @ Z), np.eye(2))


def test_nullspace_random():
    B = S(np.random.default_rng(0).standard_normal((3, 7)))
    Z = nullspace_basis(B).Z
    assert Z.shape == (7, 4)
    assert np.linalg.norm(B.to_dense() @ Z) <= 1e-12 * np.linalg.norm(B.to_dense())
    assert np.allclose(Z.T @ Z, np.eye(4), atol=1e-12)


def test_nullspace_rank_deficient():
    with pytest.raises(RankDeficientB):
        nullspace_basis(S([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]]))


# ----------------------------------------------------------------- exact
def test_exact_schur_examples():
    A, B = SparseMatrix.diag([1.0, 0.0]), S([[0.0, 1.0]])
    blk = build_augmented(A, B, WeightSelection.partial([0], 1))
    op = exact_schur(blk, B)
    assert np.allclose(op.matrix(), [[1.0]])
    assert np.allclose(op.apply_inverse(np.array([3.0])), [3.0])


def test_exact_schur_dense_oracle():
    s = generate_random_saddle(GeneratorSpec(20, 6, 2), 1)
    blk = build_augmented(s.A, s.B, rank_k_selection(s, 2))
    Bd = s.B.to_dense()
    ref = Bd @ np.linalg.solve(blk.Ak.to_dense(), Bd.T)
    assert np.linalg.norm(exact_schur(blk, s.B).matrix() - ref) <= 1e-12 * np.linalg.norm(ref)


def test_maximal_nullity_schur_is_inverse_weight():
    for seed in range(20):
        n, m = [(12, 4), (20, 6), (30, 10)][seed % 3]
        s = generate_random_saddle(GeneratorSpec(n, m, m), seed)
        blk = build_augmented(s.A, s.B, WeightSelection.full(m))
        Sk = exact_schur(blk, s.B).matrix()
        assert np.linalg.norm(Sk - np.eye(m)) <= 1e-10 * np.sqrt(m)


# ----------------------------------------------------------------- additive formula
def test_additive_trivial_example():
    A, B = SparseMatrix.diag([1.0, 0.0]), S([[0.0, 1.0]])
    assert np.allclose(schur_inverse_additive(A, B, WeightSelection.partial([0], 1)), [[1.0]])


def test_additive_k_zero_matches_inverse():
    s = generate_random_saddle(GeneratorSpec(15, 4, 0), 2)
    Bd = s.B.to_dense()
    ref = np.linalg.inv(Bd @ np.linalg.solve(s.A.to_dense(), Bd.T))
    got = schur_inverse_additive(s.A, s.B, WeightSelection.partial([], 4))
    assert np.linalg.norm(got - ref) <= 1e-8 * np.linalg.norm(ref)


def test_additive_matches_exact_inverse():
    cases = [(8, 3, 2)] + [((12, 30, 60)[i % 3], (4, 10, 15)[i % 3], i % 4) for i in range(19)]
    for seed, (n, m, k) in enumerate(cases):
        s = generate_random_saddle(GeneratorSpec(n, m, k), seed)
        sel = rank_k_selection(s, k)
        blk = build_augmented(s.A, s.B, sel)
        ref = np.linalg.inv(exact_schur(blk, s.B).matrix())
        got = schur_inverse_additive(s.A, s.B, sel)
        assert np.linalg.norm(got - ref) <= 1e-8 * np.linalg.norm(ref)


def test_additive_singular_reduced_hessian():
    # A vanishes on ker(B), so Z^T A Z = 0
    A = SparseMatrix.diag([1.0, 0.0, 0.0])
    B = S([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SingularReducedHessian):
        schur_inverse_additive(SparseMatrix.diag([0.0, 1.0, 1.0]), B, WeightSelection.full(2))
    assert A.nnz == 1


# ----------------------------------------------------------------- WkI
def test_wki_examples():
    op = wki_operator(WeightSelection.partial([], 3), 1.0, 3)
    r = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(op.apply_inverse(r), r)
    op = wki_operator(WeightSelection.partial([1], 3), 0.5, 3)
    assert op.apply_inverse(r).tolist() == [0.5, -3.0, 1.5]
    with pytest.raises(ValueError):
        wki_operator(WeightSelection.partial([], 3), 0.0, 3)


def test_wki_limit_at_maximal_nullity():
    s = generate_random_saddle(GeneratorSpec(20, 5, 5), 3)
    sel = WeightSelection.full(5)
    Sinv = np.linalg.inv(exact_schur(build_augmented(s.A, s.B, sel), s.B).matrix())
    for beta in (1.0, 1e-3, 1e-6):
        err = np.linalg.norm(wki_operator(sel, beta, 5).inverse_matrix() - Sinv, 2)
        assert err <= beta + 1e-12


# ----------------------------------------------------------------- BFBT
def test_bfbt_orthonormal_rows():
    rng = np.random.default_rng(4)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    B = S(Q[:2])
    A = S(np.diag(rng.uniform(0, 2, 6)))
    sel = WeightSelection.partial([1], 2)
    ref = np.diag([0.0, 1.0]) + B.to_dense() @ A.to_dense() @ B.to_dense().T
    assert np.allclose(bfbt_operator(A, B, sel).inverse_matrix(), ref, atol=1e-12)


def test_bfbt_zero_A():
    B = S(np.random.default_rng(5).standard_normal((3, 5)))
    sel = WeightSelection.full(3)
    op = bfbt_operator(SparseMatrix.zeros(5, 5), B, sel)
    assert np.allclose(op.inverse_matrix(), np.eye(3))


def test_bfbt_exact_on_aligned_system():
    s = generate_aligned_saddle(20, 5, 0)
    sel = WeightSelection.full(5)
    add = schur_inverse_additive(s.A, s.B, sel)
    assert np.linalg.norm(bfbt_operator(s.A, s.B, sel).inverse_matrix() - add) <= 1e-8 * np.linalg.norm(add)


def test_bfbt_rank_deficient_B():
    with pytest.raises(NotPositiveDefinite):
        bfbt_operator(SparseMatrix.identity(3), S([[1.0, 0, 0], [2.0, 0, 0]]), WeightSelection.full(2))


# ----------------------------------------------------------------- operator properties
def _operators(seed):
    s = generate_random_saddle(GeneratorSpec(20, 6, 2), seed)
    sel = rank_k_selection(s, 2)
    blk = build_augmented(s.A, s.B, sel)
    return [exact_schur(blk, s.B), diagonal_schur(blk.Ak.diagonal(), s.B),
            wki_operator(sel, 0.1, 6), bfbt_operator(s.A, s.B, sel)]


@settings(max_examples=10)
@given(st.integers(0, 1000))
def test_operators_spd_and_linear(seed):
    rng = np.random.default_rng(seed)
    for op in _operators(seed % 7):
        for _ in range(50):
            r = rng.standard_normal(6)
            assert r @ op.apply_inverse(r) > 0
        x, y = rng.standard_normal(6), rng.standard_normal(6)
        lhs = op.apply_inverse(2.0 * x - 3.0 * y)
        rhs = 2.0 * op.apply_inverse(x) - 3.0 * op.apply_inverse(y)
        assert np.linalg.norm(lhs - rhs) <= 1e-13 * np.linalg.norm(rhs) * 10


def test_schur_operator_validation():
    with pytest.raises(ValueError):
        SchurOperator("nonsense", lambda r: r, 2)
    with pytest.raises(ValueError):
        SchurOperator("wki", lambda r: r, 2, beta=0.0)
