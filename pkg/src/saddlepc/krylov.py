"""Krylov solvers: preconditioned MINRES, PCG and flexible GMRES(restart).

All solvers start from the zero vector.  Operators are callables acting on
flat numpy vectors, or objects exposing ``matvec``; preconditioners are
callables or objects exposing ``solve`` (the action of M^{-1}).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import IndefiniteOperator, NotPositiveDefinite
from .saddle import BlockVector

log = logging.getLogger(__name__)

# outer tolerance of the LP experiments, IPM inner tolerance, inner CG tolerance
DEFAULT_TOL = 1e-8
IPM_INNER_TOL = 1e-7
INNER_CG_TOL = 0.1
DEFAULT_RESTART = 30
TRUE_RESIDUAL_SLACK = 10.0


@dataclass
class SolveReport:
    """Outcome of an iterative solve.

    ``relative_residuals`` has ``iterations + 1`` entries: the solver's own
    residual estimate relative to its initial value, starting at 1.  For
    MINRES this is the preconditioned residual norm; for PCG and FGMRES it
    is the Euclidean residual norm.  ``true_relative_residual`` is
    ||b - K x|| / ||b||, recomputed from scratch at exit.
    """

    solution: object
    iterations: int
    relative_residuals: np.ndarray
    true_relative_residual: float
    converged: bool
    seconds: float
    status: str = ""
    inner_iterations: list = field(default_factory=list)

    @property
    def seconds_per_iteration(self) -> float:
        return self.seconds / max(self.iterations, 1)


def _operator(op):
    if callable(op) and not hasattr(op, "matvec"):
        return op
    return op.matvec


def _preconditioner(P):
    if P is None:
        return lambda r: r
    if hasattr(P, "solve"):
        return P.solve
    return P


def _flatten(b):
    if isinstance(b, BlockVector):
        n = len(b.top)
        return b.flat(), lambda x: BlockVector.from_flat(x, n)
    return np.asarray(b, dtype=float), lambda x: x


def minres(apply_K, P, b, tol: float = DEFAULT_TOL, maxit: int | None = None) -> SolveReport:
    """Preconditioned MINRES for symmetric K with SPD preconditioner P.

    Stops once the preconditioned residual estimate falls to ``tol`` times its
    initial value and the recomputed true relative residual is at most
    ``10 * tol``; if the true residual lags, iteration continues.

    Raises
    ------
    ValueError
        If ``P`` is flexible (varies between applications).
    NotPositiveDefinite
        If ``P`` is detected to be indefinite.
    """
    if getattr(P, "flexible", False):
        raise ValueError("MINRES needs a fixed preconditioner; use fgmres for flexible ones")
    t0 = time.perf_counter()
    K = _operator(apply_K)
    Minv = _preconditioner(P)
    b, wrap = _flatten(b)
    N = len(b)
    maxit = 5 * N if maxit is None else maxit
    x = np.zeros(N)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(wrap(x), 0, np.array([0.0]), 0.0, True, time.perf_counter() - t0, "zero rhs")

    r1 = b.copy()
    y = Minv(r1)
    beta1 = r1 @ y
    if beta1 <= 0:
        raise NotPositiveDefinite("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    oldb, beta, dbar, epsln = 0.0, beta1, 0.0, 0.0
    phibar, cs, sn = beta1, -1.0, 0.0
    w = np.zeros(N)
    w2 = np.zeros(N)
    r2 = r1.copy()
    history = [1.0]
    status = "max iterations"
    converged = False
    true_rel = 1.0
    itn = 0
    while itn < maxit:
        itn += 1
        v = y / beta
        y = K(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = v @ y
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        y = Minv(r2)
        oldb = beta
        beta2 = r2 @ y
        if beta2 < 0:
            raise NotPositiveDefinite("preconditioner is not positive definite")
        beta = np.sqrt(beta2)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        rel = phibar / beta1
        history.append(rel)

        lucky = beta <= np.finfo(float).eps * beta1
        if rel <= tol or lucky:
            true_rel = np.linalg.norm(b - K(x)) / bnorm
            if true_rel <= TRUE_RESIDUAL_SLACK * tol or lucky:
                converged = true_rel <= TRUE_RESIDUAL_SLACK * tol
                status = "breakdown" if lucky else "converged"
                break
    else:
        true_rel = np.linalg.norm(b - K(x)) / bnorm
    return SolveReport(wrap(x), itn, np.array(history), float(true_rel), converged,
                       time.perf_counter() - t0, status)


def pcg(apply_M, precond_action, b, tol: float = INNER_CG_TOL, maxit: int | None = None) -> SolveReport:
    """Preconditioned conjugate gradients for an SPD operator.

    Stops when ||r|| <= tol ||b||.

    Raises
    ------
    IndefiniteOperator
        If a search direction has nonpositive curvature.
    """
    t0 = time.perf_counter()
    M = _operator(apply_M)
    Minv = _preconditioner(precond_action)
    b = np.asarray(b, dtype=float)
    maxit = 2 * len(b) if maxit is None else maxit
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(x, 0, np.array([0.0]), 0.0, True, time.perf_counter() - t0, "zero rhs")
    r = b.copy()
    z = Minv(r)
    p = z.copy()
    rz = r @ z
    history = [1.0]
    converged = False
    itn = 0
    while itn < maxit:
        itn += 1
        q = M(p)
        pq = p @ q
        if pq <= 0:
            raise IndefiniteOperator(f"p^T M p = {pq:.3e} at iteration {itn}")
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        rel = np.linalg.norm(r) / bnorm
        history.append(rel)
        if rel <= tol:
            converged = True
            break
        z = Minv(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    true_rel = np.linalg.norm(b - M(x)) / bnorm
    return SolveReport(x, itn, np.array(history), float(true_rel), converged,
                       time.perf_counter() - t0, "converged" if converged else "max iterations")


def fgmres(apply_K, flexible_precond, b, tol: float = DEFAULT_TOL,
           restart: int = DEFAULT_RESTART, maxit: int | None = None) -> SolveReport:
    """Right-preconditioned flexible GMRES with restarts.

    The preconditioned directions Z_j = M_j^{-1} v_j are stored, so the
    preconditioner may change from one application to the next.
    """
    t0 = time.perf_counter()
    K = _operator(apply_K)
    Minv = _preconditioner(flexible_precond)
    b, wrap = _flatten(b)
    N = len(b)
    maxit = 5 * N if maxit is None else maxit
    x = np.zeros(N)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(wrap(x), 0, np.array([0.0]), 0.0, True, time.perf_counter() - t0, "zero rhs")
    history = [1.0]
    total = 0
    r = b.copy()
    beta = bnorm
    status = "max iterations"
    converged = False
    while total < maxit:
        V = np.zeros((restart + 1, N))
        Z = np.zeros((restart, N))
        H = np.zeros((restart + 1, restart))
        cs = np.zeros(restart)
        sn = np.zeros(restart)
        g = np.zeros(restart + 1)
        g[0] = beta
        V[0] = r / beta
        happy = False
        j = -1
        for j in range(restart):
            Z[j] = Minv(V[j])
            w = K(Z[j])
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w = w - H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                h0, h1 = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * h0 + sn[i] * h1
                H[i + 1, j] = -sn[i] * h0 + cs[i] * h1
            rho = np.hypot(H[j, j], H[j + 1, j])
            happy = H[j + 1, j] <= 1e-14 * rho
            if not happy:
                V[j + 1] = w / H[j + 1, j]
            cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            history.append(abs(g[j + 1]) / bnorm)
            if happy or abs(g[j + 1]) <= tol * bnorm or total >= maxit:
                break
        k = j + 1
        yk = np.linalg.solve(np.triu(H[:k, :k]), g[:k])
        x = x + Z[:k].T @ yk
        r = b - K(x)
        beta = np.linalg.norm(r)
        if beta <= TRUE_RESIDUAL_SLACK * tol * bnorm and (happy or abs(g[k]) <= tol * bnorm):
            converged = True
            status = "breakdown" if happy else "converged"
            break
        if happy:
            status = "breakdown"
            break
    return SolveReport(wrap(x), total, np.array(history), float(beta / bnorm), converged,
                       time.perf_counter() - t0, status)
