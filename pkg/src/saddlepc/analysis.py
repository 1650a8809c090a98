"""Spectral verification of preconditioned saddle-point operators.

The eigenvalues of M^{-1} K are computed as those of L^{-1} K L^{-T} with
M = L L^T.  That matrix is congruent to the split operator
M^{-1/2} K M^{-1/2} and similar to M^{-1} K, so all three share a spectrum.
The dense symmetric eigensolver is a cyclic Jacobi method with round-robin
(parallel) ordering, so that every sweep is a sequence of vectorized
rotation rounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .augmentation import WeightSelection, build_augmented
from .errors import NotPositiveDefinite, SingularReducedHessian
from .precond import BlockDiagPrecond, make_ideal
from .saddle import SaddleSystem, check_wellposed, numerical_rank
from .schur import exact_schur, nullspace_basis, schur_inverse_additive
from .sparse import EPS, dense_cholesky

GOLDEN_PLUS = (1 + np.sqrt(5)) / 2
GOLDEN_MINUS = (1 - np.sqrt(5)) / 2
JACOBI_MAX_DIM = 500
CLUSTER_TOL = 1e-8
IDENTITY_TOL = 1e-9

VERDICT_NAMES = ("four_eig", "two_eig", "interval_bounds", "mrd_schur", "kw_identity",
                 "wishlist", "commute", "lower_bound", "sc_add")


# --------------------------------------------------------------- eigensolver
def _round_robin(N: int):
    """Pairings of 0..N-1 (N even) so each pair meets exactly once per sweep."""
    players = list(range(N))
    for _ in range(N - 1):
        yield [(players[i], players[N - 1 - i]) for i in range(N // 2)]
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigh(M, tol: float = 1e-12, max_sweeps: int = 60, vectors: bool = False):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius norm is at most
    ``tol * ||M||_F``.  Returns ascending eigenvalues, and the orthogonal
    eigenvector matrix when ``vectors`` is true.
    """
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got {A.shape}")
    n = A.shape[0]
    if n > JACOBI_MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the Jacobi cap of {JACOBI_MAX_DIM}")
    if np.abs(A - A.T).max(initial=0.0) > 1e-10 * max(np.abs(A).max(initial=0.0), 1e-300):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n) if vectors else None
    fro = np.linalg.norm(A)
    N = n + (n % 2)
    rounds = []
    for pairs in _round_robin(N):
        pq = np.array([(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n], dtype=int)
        if len(pq):
            rounds.append((pq[:, 0], pq[:, 1]))

    def off_norm():
        # direct sum; ||A||^2 - ||diag||^2 cancels down to sqrt(eps) * ||A||
        return np.linalg.norm(A[~np.eye(n, dtype=bool)])

    for _ in range(max_sweeps):
        if off_norm() <= tol * fro:
            break
        for p, q in rounds:
            apq = A[p, q]
            rot = apq != 0.0
            if not rot.any():
                continue
            p, q, apq = p[rot], q[rot], apq[rot]
            with np.errstate(over="ignore"):  # huge theta just means no rotation
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = Ap * c - Aq * s
            A[:, q] = Ap * s + Aq * c
            A[p, q] = 0.0
            A[q, p] = 0.0
            if V is not None:
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = Vp * c - Vq * s
                V[:, q] = Vp * s + Vq * c
    else:
        if off_norm() > tol * fro:
            raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    if vectors:
        return w[order], V[:, order]
    return w[order]


def sym_eigenvalues(M) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending."""
    return jacobi_eigh(M)


# ----------------------------------------------------------------- spectra
@dataclass(frozen=True)
class Cluster:
    center: float
    multiplicity: int


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    clusters: list
    cluster_tol: float = CLUSTER_TOL

    @classmethod
    def from_eigenvalues(cls, eigenvalues, cluster_tol: float = CLUSTER_TOL) -> "SpectrumReport":
        return cls(np.sort(eigenvalues), cluster(eigenvalues, cluster_tol), cluster_tol)

    def fraction_near(self, centers, radius: float) -> float:
        ev = self.eigenvalues
        d = np.min(np.abs(ev[:, None] - np.asarray(centers)[None, :]), axis=1)
        return float(np.mean(d <= radius))


def cluster(eigenvalues, tol: float = CLUSTER_TOL) -> list:
    """Single-linkage clusters: split the sorted values wherever a gap exceeds ``tol``."""
    ev = np.sort(np.asarray(eigenvalues, dtype=float))
    if not len(ev):
        return []
    breaks = np.flatnonzero(np.diff(ev) > tol) + 1
    return [Cluster(float(g.mean()), len(g)) for g in np.split(ev, breaks)]


def congruent_operator(sys: SaddleSystem, P: BlockDiagPrecond) -> np.ndarray:
    """L^{-1} K L^{-T} for the Cholesky factor L of the materialized preconditioner."""
    if P.flexible:
        raise ValueError("a flexible preconditioner has no fixed matrix")
    K = sys.assemble_dense()
    L = dense_cholesky(P.matrix()).lower
    X = scipy.linalg.solve_triangular(L, K, lower=True)
    C = scipy.linalg.solve_triangular(L, X.T, lower=True)
    return 0.5 * (C + C.T)


def preconditioned_spectrum(sys: SaddleSystem, P: BlockDiagPrecond,
                            cluster_tol: float = CLUSTER_TOL) -> SpectrumReport:
    return SpectrumReport.from_eigenvalues(sym_eigenvalues(congruent_operator(sys, P)), cluster_tol)


def pencil_spectrum(sys: SaddleSystem, P: BlockDiagPrecond) -> np.ndarray:
    """Eigenvalues of the generalized pencil (K, M) by LAPACK; an independent route."""
    return scipy.linalg.eigh(sys.assemble_dense(), P.matrix(), eigvals_only=True)


# ----------------------------------------------------------------- verdicts
@dataclass
class TheoremVerdict:
    name: str
    passed: bool
    max_deviation: float
    details: str = ""
    applicable: bool = True
    tolerance: float = 0.0
    extra: dict = field(default_factory=dict)

    @classmethod
    def inapplicable(cls, name, why) -> "TheoremVerdict":
        return cls(name, False, float("nan"), f"inapplicable: {why}", applicable=False)

    @classmethod
    def check(cls, name, deviation, tol, details="", **extra) -> "TheoremVerdict":
        deviation = float(deviation)
        return cls(name, bool(deviation <= tol), deviation, details, True, tol, extra)

    def as_row(self) -> dict:
        return {"check": self.name, "applicable": self.applicable, "passed": self.passed,
                "max_deviation": self.max_deviation, "tolerance": self.tolerance,
                "details": self.details}


def _nullity(sys: SaddleSystem) -> int:
    return check_wellposed(sys).nullity_A


def _ideal_spectrum(sys, sel):
    blk = build_augmented(sys.A, sys.B, sel)
    return preconditioned_spectrum(sys, make_ideal(blk, sys.B))


def _match_centers(name, ev, expected: dict, tol: float) -> TheoremVerdict:
    centers = np.array(list(expected))
    nearest = np.argmin(np.abs(ev[:, None] - centers[None, :]), axis=1)
    dev = float(np.max(np.abs(ev - centers[nearest]))) if len(ev) else 0.0
    counts = {float(c): int(np.sum(nearest == i)) for i, c in enumerate(centers)}
    want = {float(c): int(k) for c, k in expected.items()}
    mult_ok = counts == want
    details = f"multiplicities {counts} expected {want}"
    verdict = TheoremVerdict.check(name, dev, tol, details, counts=counts)
    verdict.passed = verdict.passed and mult_ok
    return verdict


def verify_four_eig(sys: SaddleSystem, sel: WeightSelection, tol: float = CLUSTER_TOL) -> TheoremVerdict:
    """Ideal M_k with rank(W_k) = nullity(A) = k gives eigenvalues -1, 1, (1±√5)/2."""
    k = _nullity(sys)
    if sel.rank != k or sel.kind == "identity":
        return TheoremVerdict.inapplicable("four_eig", f"rank(W_k)={sel.rank} but nullity(A)={k}")
    try:
        spec = _ideal_spectrum(sys, sel)
    except NotPositiveDefinite:
        return TheoremVerdict.inapplicable("four_eig", "A_k is not positive definite")
    n, m = sys.n, sys.m
    expected = {-1.0: k, 1.0: n - m + k, GOLDEN_MINUS: m - k, GOLDEN_PLUS: m - k}
    return _match_centers("four_eig", spec.eigenvalues, expected, tol)


def verify_two_eig(sys: SaddleSystem, sel: WeightSelection | None = None,
                   tol: float = IDENTITY_TOL) -> TheoremVerdict:
    """Maximal nullity with invertible W: eigenvalues exactly ±1."""
    sel = sel or WeightSelection.full(sys.m)
    if _nullity(sys) != sys.m:
        return TheoremVerdict.inapplicable("two_eig", "nullity(A) != m")
    if sel.rank != sys.m:
        return TheoremVerdict.inapplicable("two_eig", "W is singular")
    spec = _ideal_spectrum(sys, sel)
    return _match_centers("two_eig", spec.eigenvalues, {-1.0: sys.m, 1.0: sys.n}, tol)


def interval_distance(ev) -> np.ndarray:
    """Distance of each value from [-1, (1-√5)/2] ∪ [1, (1+√5)/2]."""
    ev = np.asarray(ev, dtype=float)
    neg = np.maximum(np.maximum(-1.0 - ev, ev - GOLDEN_MINUS), 0.0)
    pos = np.maximum(np.maximum(1.0 - ev, ev - GOLDEN_PLUS), 0.0)
    return np.minimum(neg, pos)


def verify_interval_bounds(sys: SaddleSystem, sel: WeightSelection, tol: float = 1e-10) -> TheoremVerdict:
    """Ideal M_2 for any PSD W with A + B^T W B SPD keeps eigenvalues in the two intervals."""
    try:
        spec = _ideal_spectrum(sys, sel)
    except NotPositiveDefinite:
        return TheoremVerdict.inapplicable("interval_bounds", "A + B^T W B is not positive definite")
    dev = interval_distance(spec.eigenvalues).max()
    return TheoremVerdict.check("interval_bounds", dev, tol,
                                f"{len(spec.clusters)} clusters, rank(W)={sel.rank}",
                                clusters=len(spec.clusters))


def _rel(err, scale) -> float:
    return float(np.linalg.norm(err) / max(scale, np.finfo(float).tiny))


def verify_identities(sys: SaddleSystem, sel: WeightSelection,
                      tol: float = IDENTITY_TOL) -> list:
    """Residual checks of the algebraic identities behind the eigenvalue results.

    Returns verdicts named ``kw_identity``, ``mrd_schur``, ``commute``,
    ``wishlist`` and ``sc_add``; those whose preconditions fail are marked
    inapplicable.
    """
    out = []
    n, m = sys.n, sys.m
    if sel.kind == "identity":
        return [TheoremVerdict.inapplicable(name, "identity augmentation has no W")
                for name in ("kw_identity", "mrd_schur", "commute", "wishlist", "sc_add")]
    A, Bd = sys.A.to_dense(), sys.B.to_dense()
    w = sel.weights(m)
    W = np.diag(w)
    G = Bd.T @ W @ Bd
    Ak = A + G
    k = _nullity(sys)
    try:
        Ak_f = dense_cholesky(0.5 * (Ak + Ak.T))
    except NotPositiveDefinite:
        return [TheoremVerdict.inapplicable(name, "A_k is not positive definite")
                for name in ("kw_identity", "mrd_schur", "commute", "wishlist", "sc_add")]
    Akinv = Ak_f.inverse()

    # K^{-1} = K(W)^{-1} + diag(0, W)
    K = sys.assemble_dense()
    KW = K.copy()
    KW[:n, :n] = Ak
    lhs = np.linalg.inv(K)
    rhs = np.linalg.inv(KW)
    rhs[n:, n:] += W
    out.append(TheoremVerdict.check("kw_identity", _rel(lhs - rhs, np.linalg.norm(lhs)), tol))

    # B A_W^{-1} B^T = W^{-1} at maximal nullity
    if k == m and sel.rank == m:
        S = Bd @ Akinv @ Bd.T
        Winv = np.diag(1.0 / w)
        out.append(TheoremVerdict.check("mrd_schur", _rel(S - Winv, np.linalg.norm(Winv)), tol))
    else:
        out.append(TheoremVerdict.inapplicable("mrd_schur", "needs nullity(A) = rank(W) = m"))

    # projectors: A_k^{-1}A, VA; A (A+G)^{-1} G = 0; commutation
    if sel.rank == k:
        Z = nullspace_basis(sys.B).Z
        R = Z.T @ A @ Z
        if numerical_rank(R) < R.shape[0]:
            raise SingularReducedHessian("Z^T A Z is singular")
        VA = Z @ np.linalg.solve(R, Z.T @ A)
        Pk = Akinv @ A
        devs = {
            "Ak^-1 A projector": _rel(Pk @ Pk - Pk, np.linalg.norm(Pk)),
            "A(A+G)^-1 G = 0": _rel(A @ Akinv @ G, np.linalg.norm(A) * np.linalg.norm(Akinv @ G)),
            "VA projector": _rel(VA @ VA - VA, np.linalg.norm(VA)),
            "commutation": _rel(Pk @ VA - VA @ Pk, np.linalg.norm(Pk) * np.linalg.norm(VA)),
        }
        worst = max(devs, key=devs.get)
        out.append(TheoremVerdict.check("commute", devs[worst], tol, f"worst: {worst}", **devs))
    else:
        out.append(TheoremVerdict.inapplicable("commute", f"rank(W_k)={sel.rank} != nullity(A)={k}"))

    # split-operator blocks at maximal nullity
    if k == m and sel.rank == m:
        L = Ak_f.lower
        At = scipy.linalg.solve_triangular(L, scipy.linalg.solve_triangular(L, A, lower=True).T,
                                           lower=True)
        Bt = scipy.linalg.solve_triangular(L, (np.sqrt(W) @ Bd).T, lower=True).T
        ev = np.linalg.eigvalsh(0.5 * (At + At.T))
        sv = np.linalg.svd(Bt, compute_uv=False)
        devs = {
            "eig(A~) in {0,1}": float(np.max(np.minimum(np.abs(ev), np.abs(ev - 1.0)))),
            "sv(B~) = 1": float(np.max(np.abs(sv - 1.0))),
            "A~ B~^T = 0": _rel(At @ Bt.T, np.linalg.norm(At) * np.linalg.norm(Bt)),
        }
        worst = max(devs, key=devs.get)
        out.append(TheoremVerdict.check("wishlist", devs[worst], tol, f"worst: {worst}", **devs))
    else:
        out.append(TheoremVerdict.inapplicable("wishlist", "needs maximal nullity and invertible W"))

    # additive Schur inverse formula against the direct inverse
    if sel.rank == k:
        blk = build_augmented(sys.A, sys.B, sel)
        Sinv = np.linalg.inv(exact_schur(blk, sys.B).matrix())
        add = schur_inverse_additive(sys.A, sys.B, sel)
        out.append(TheoremVerdict.check("sc_add", _rel(add - Sinv, np.linalg.norm(Sinv)), tol))
    else:
        out.append(TheoremVerdict.inapplicable("sc_add", f"rank(W_k)={sel.rank} != nullity(A)={k}"))
    return out


def lower_bound(sys: SaddleSystem) -> dict:
    """Ingredients of the positive-eigenvalue bound for maximally rank-deficient A."""
    A, Bd = sys.A.to_dense(), sys.B.to_dense()
    mu, U = np.linalg.eigh(A)
    cut = max(sys.n, sys.m) * EPS * max(np.abs(mu).max(), np.finfo(float).tiny)
    pos = mu > cut
    _, sv, Vt = np.linalg.svd(Bd, full_matrices=False)
    UA, UB = U[:, pos], Vt.T
    cos_min = float(min(np.linalg.svd(UA.T @ UB, compute_uv=False).max(initial=0.0), 1.0))
    mu_min = float(mu[pos].min())
    sigma_min = float(sv.min())
    bound = min(mu_min * (1 - cos_min), sigma_min * np.sqrt(1 - cos_min))
    return {"mu_min": mu_min, "sigma_min": sigma_min, "cos_theta_min": cos_min, "bound": bound}


def verify_lower_bound(sys: SaddleSystem, tol: float = 1e-10) -> TheoremVerdict:
    """Positive eigenvalues of K are at least min{mu(1-cos θ), sigma sqrt(1-cos θ)}."""
    if numerical_rank(sys.A, max(sys.n, sys.m)) != sys.n - sys.m:
        return TheoremVerdict.inapplicable("lower_bound", "rank(A) != n - m")
    parts = lower_bound(sys)
    ev = sym_eigenvalues(sys.assemble_dense())
    smallest = float(ev[ev > 0].min())
    dev = max(parts["bound"] - smallest, 0.0)
    return TheoremVerdict.check("lower_bound", dev, tol,
                                f"bound {parts['bound']:.6g} <= min positive eigenvalue {smallest:.6g}",
                                min_positive=smallest, **parts)


def verify_all(sys: SaddleSystem, sel: WeightSelection) -> list:
    """Every verdict the system admits; used by the command-line front end."""
    verdicts = [verify_four_eig(sys, sel), verify_two_eig(sys, sel), verify_interval_bounds(sys, sel)]
    verdicts += verify_identities(sys, sel)
    verdicts.append(verify_lower_bound(sys))
    return verdicts
