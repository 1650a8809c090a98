"""Mehrotra predictor-corrector interior-point method for standard-form LP/QP.

    min c^T x + 1/2 x^T H x   s.t.  J x = b,  x >= 0

Each iteration solves two saddle-point systems that share the matrix

    [ H + X^{-1} Z   J^T ]
    [ J              0   ]

either directly or by preconditioned MINRES.  As the iterates approach the
boundary, the leading block becomes numerically singular and the
preconditioner switches to partial augmentation with a diagonal
approximation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .augmentation import AugmentedBlock, WeightSelection, build_augmented, select_weight_rows
from .errors import DimensionMismatch, IterationLimit, NotPositiveDefinite, StructuralDeficiency
from .krylov import IPM_INNER_TOL, SolveReport, minres
from .precond import make_diagonal, make_ic
from .saddle import SaddleSystem, numerical_rank
from .sparse import EPS, SparseMatrix, as_vector

log = logging.getLogger(__name__)

STEP_TO_BOUNDARY = 0.995
GAP_TOL = 1e-6
MAX_IPM_ITERATIONS = 100


@dataclass(frozen=True)
class QpProblem:
    H: SparseMatrix
    J: SparseMatrix
    b: np.ndarray
    c: np.ndarray
    name: str = "qp"

    def __post_init__(self):
        m, n = self.J.shape
        if self.H.shape != (n, n):
            raise DimensionMismatch(f"H is {self.H.shape}, expected {(n, n)}")
        object.__setattr__(self, "b", as_vector(self.b, m))
        object.__setattr__(self, "c", as_vector(self.c, n))
        if not self.H.is_symmetric(1e-12):
            raise ValueError("H must be symmetric")
        if numerical_rank(self.J) < m:
            raise ValueError("J must have full row rank")

    @classmethod
    def lp(cls, J, b, c, name="lp") -> "QpProblem":
        if not isinstance(J, SparseMatrix):
            J = SparseMatrix.from_dense(J)
        return cls(SparseMatrix.zeros(J.ncols, J.ncols), J, b, c, name)

    @property
    def n(self) -> int:
        return self.J.ncols

    @property
    def m(self) -> int:
        return self.J.nrows

    @property
    def is_lp(self) -> bool:
        return self.H.nnz == 0

    def objective(self, x) -> float:
        return float(self.c @ x + 0.5 * x @ self.H.dot(x))


@dataclass
class IpmState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    tau: float = 0.0
    iteration: int = 0

    def is_interior(self) -> bool:
        return bool(np.all(self.x > 0) and np.all(self.z > 0))


@dataclass
class IterationRecord:
    iteration: int
    duality_gap: float
    primal_infeasibility: float
    dual_infeasibility: float
    leading_singular: bool = False
    policy: str = "none"
    rank_W: int = 0
    predictor: SolveReport | None = None
    corrector: SolveReport | None = None
    step_lengths: tuple = (0.0, 0.0)
    sigma: float = 0.0
    inner_failed: bool = False


@dataclass
class IpmTrace:
    records: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        """Completed steps; the last record only holds the stopping test."""
        return max(len(self.records) - 1, 0)

    def mean_inner_iterations(self, which: str = "predictor") -> float:
        its = [getattr(r, which).iterations for r in self.records if getattr(r, which) is not None]
        return float(np.mean(its)) if its else 0.0

    def singular_iterations(self) -> list:
        return [r.iteration for r in self.records if r.leading_singular]


@dataclass
class IpmResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    trace: IpmTrace
    converged: bool
    iterations: int
    status: str = ""

    @property
    def duality_gap(self) -> float:
        return float(self.x @ self.z)


def build_kkt(prob: QpProblem, state: IpmState) -> SaddleSystem:
    """Saddle-point system with A = H + X^{-1} Z and B = J."""
    if np.any(state.x <= 0):
        raise ValueError("x must be strictly positive")
    return SaddleSystem(prob.H + SparseMatrix.diag(state.z / state.x), prob.J)


def detect_singular_leading(A: SparseMatrix) -> bool:
    """Is the smallest eigenvalue below n * eps * max(diag(A))?"""
    n = A.nrows
    d = A.diagonal()
    top = d.max() if len(d) else 0.0
    if top <= 0:
        return True
    if A.nnz == np.count_nonzero(d):  # diagonal matrix
        lam_min = d.min()
    else:
        lam_min = np.linalg.eigvalsh(A.to_dense())[0]
    return bool(lam_min < n * EPS * top)


def initial_point(prob: QpProblem) -> IpmState:
    """Least-squares start with x and z clamped to at least 1."""
    Jd = prob.J.to_dense()
    JJt = scipy.linalg.cho_factor(Jd @ Jd.T)
    x = Jd.T @ scipy.linalg.cho_solve(JJt, prob.b)
    y = scipy.linalg.cho_solve(JJt, Jd @ (prob.c + prob.H.dot(x)))
    z = prob.c + prob.H.dot(x) - Jd.T @ y
    return IpmState(np.maximum(x, 1.0), y, np.maximum(z, 1.0))


def _max_step(v, dv) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


class _KktSolver:
    """Solves with one KKT matrix; built once per IPM iteration."""

    def __init__(self, sys: SaddleSystem, prob: QpProblem, inner: str, inner_tol: float,
                 inner_maxit: int | None):
        self.sys = sys
        self.inner = inner
        self.inner_tol = inner_tol
        self.inner_maxit = inner_maxit
        self.singular = detect_singular_leading(sys.A)
        self.rank_W = 0
        if inner == "direct":
            self.policy = "direct"
            self.lu = scipy.linalg.lu_factor(sys.assemble_dense())
            return
        if inner != "minres":
            raise ValueError(f"unknown inner solver {inner!r}")
        self.P = None
        if not self.singular:
            blk = AugmentedBlock(sys.A, WeightSelection.partial((), sys.m))
            try:
                if prob.is_lp:
                    self.P, self.policy = make_diagonal(blk, sys.B), "M_LP"
                else:
                    self.P, self.policy = make_ic(blk, sys.B), "M_QP"
            except NotPositiveDefinite:
                log.info("nonsingular-block preconditioner failed; augmenting instead")
        if self.P is None:
            try:
                sel = select_weight_rows(sys.A, sys.B)
            except StructuralDeficiency:
                sel = WeightSelection.full(sys.m)
            blk = build_augmented(sys.A, sys.B, sel, certify=False)
            self.P, self.policy = make_diagonal(blk, sys.B), "partial+D"
            self.rank_W = sel.rank

    def solve(self, rhs) -> tuple[np.ndarray, SolveReport | None]:
        if self.inner == "direct":
            return scipy.linalg.lu_solve(self.lu, rhs), None
        rep = minres(self.sys.matvec, self.P, rhs, tol=self.inner_tol, maxit=self.inner_maxit)
        return rep.solution, rep


def mehrotra_solve(prob: QpProblem, inner: str = "direct", gap_tol: float = GAP_TOL,
                   inner_tol: float = IPM_INNER_TOL, maxit: int = MAX_IPM_ITERATIONS,
                   inner_maxit: int | None = None, feas_tol: float | None = None) -> IpmResult:
    """Solve ``prob`` by Mehrotra's predictor-corrector method.

    ``inner`` is ``"direct"`` (dense LU of the KKT matrix) or ``"minres"``
    (preconditioned MINRES to relative tolerance ``inner_tol``).  The loop
    stops when the duality gap x^T z is at most ``gap_tol`` and the scaled
    primal and dual residuals are at most ``feas_tol`` (default ``gap_tol``).

    Raises
    ------
    IterationLimit
        After ``maxit`` iterations; the exception carries the last iterate
        as ``.result``.
    """
    feas_tol = gap_tol if feas_tol is None else feas_tol
    n = prob.n
    state = initial_point(prob)
    trace = IpmTrace()
    x, y, z = state.x, state.y, state.z
    bscale = 1.0 + np.linalg.norm(prob.b)
    cscale = 1.0 + np.linalg.norm(prob.c)
    for it in range(maxit + 1):
        rp = prob.b - prob.J.dot(x)
        Fd = prob.J.T.dot(y) + z - prob.H.dot(x) - prob.c
        gap = float(x @ z)
        rec = IterationRecord(it, gap, float(np.linalg.norm(rp) / bscale),
                              float(np.linalg.norm(Fd) / cscale))
        trace.records.append(rec)
        if gap <= gap_tol and rec.primal_infeasibility <= feas_tol \
                and rec.dual_infeasibility <= feas_tol:
            return IpmResult(x, y, z, trace, True, it, "converged")
        if it == maxit:
            break

        sys = build_kkt(prob, IpmState(x, y, z))
        solver = _KktSolver(sys, prob, inner, inner_tol, inner_maxit)
        rec.leading_singular = solver.singular
        rec.policy = solver.policy
        rec.rank_W = solver.rank_W

        def direction(rc):
            rhs = np.concatenate([Fd + rc / x, rp])
            sol, rep = solver.solve(rhs)
            dx = sol[:n]
            dy = -sol[n:]
            dz = (rc - z * dx) / x
            return dx, dy, dz, rep

        mu = gap / n
        rc_aff = -x * z
        dx_a, dy_a, dz_a, rec.predictor = direction(rc_aff)
        ap, ad = _max_step(x, dx_a), _max_step(z, dz_a)
        if not prob.is_lp:
            ap = ad = min(ap, ad)
        mu_aff = float((x + ap * dx_a) @ (z + ad * dz_a)) / n
        sigma = (mu_aff / mu) ** 3
        rc = -x * z - dx_a * dz_a + sigma * mu
        dx, dy, dz, rec.corrector = direction(rc)
        for rep in (rec.predictor, rec.corrector):
            if rep is not None and not rep.converged:
                rec.inner_failed = True
                log.warning("inner MINRES did not converge at IPM iteration %d (relres %.2e)",
                            it, rep.true_relative_residual)
        ap = min(1.0, STEP_TO_BOUNDARY * _max_step(x, dx))
        ad = min(1.0, STEP_TO_BOUNDARY * _max_step(z, dz))
        if not prob.is_lp:
            ap = ad = min(ap, ad)
        rec.step_lengths = (ap, ad)
        rec.sigma = sigma
        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz
        state = IpmState(x, y, z, sigma * mu, it + 1)
    result = IpmResult(x, y, z, trace, False, maxit, "iteration limit")
    exc = IterationLimit(f"no convergence in {maxit} IPM iterations (gap {x @ z:.3e})")
    exc.result = result
    raise exc
