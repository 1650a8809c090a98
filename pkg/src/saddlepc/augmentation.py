"""Weight-matrix selection and augmented leading blocks A_k = A + B^T W_k B.

W_k is always a diagonal 0/1 matrix, described by the set of rows of B it
selects.  Selection runs in two phases: a structural phase that adds rows of
B until the pattern of A (with negligible entries dropped) plus the selected
outer products has full structural rank, and a numerical phase that keeps
adding the sparsest unused rows until A_k factors and is well conditioned.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite, StructuralDeficiency
from .matching import PatternMatching
from .sparse import EPS, CholeskyFactor, SparseMatrix, cond1, dense_cholesky, triple_product

log = logging.getLogger(__name__)

KINDS = ("partial", "full", "identity")
COND_CAP = 1e14


@dataclass(frozen=True)
class WeightSelection:
    """Rows of B selected by the diagonal 0/1 weight matrix W_k.

    ``extra_rows`` lists the rows appended by :func:`ensure_numerical_rank`
    after the structural phase; they are also contained in ``rows``.
    """

    rows: tuple[int, ...]
    kind: str = "partial"
    m: int | None = None
    rho: float = 0.0
    extra_rows: tuple[int, ...] = ()

    def __post_init__(self):
        rows = tuple(sorted(int(i) for i in self.rows))
        if len(set(rows)) != len(rows):
            raise ValueError("duplicate row in selection")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "extra_rows", tuple(sorted(self.extra_rows)))
        if self.kind not in KINDS:
            raise ValueError(f"unknown selection kind {self.kind!r}")
        if self.m is not None and rows and (rows[0] < 0 or rows[-1] >= self.m):
            raise IndexError("selected row out of range")
        if self.kind == "full" and (self.m is None or rows != tuple(range(self.m))):
            raise ValueError("full selection must contain every row")
        if self.kind == "identity" and (rows or not self.rho > 0):
            raise ValueError("identity augmentation takes no rows and rho > 0")
        if not set(self.extra_rows) <= set(rows):
            raise ValueError("extra rows must be part of the selection")

    @classmethod
    def full(cls, m: int) -> "WeightSelection":
        return cls(tuple(range(m)), "full", m)

    @classmethod
    def partial(cls, rows, m: int | None = None) -> "WeightSelection":
        return cls(tuple(rows), "partial", m)

    @classmethod
    def identity(cls, rho: float) -> "WeightSelection":
        return cls((), "identity", None, rho)

    @property
    def rank(self) -> int:
        return len(self.rows)

    @property
    def structural_rows(self) -> tuple[int, ...]:
        extra = set(self.extra_rows)
        return tuple(r for r in self.rows if r not in extra)

    def weights(self, m: int) -> np.ndarray:
        """Diagonal of W_k as a length-m 0/1 vector."""
        w = np.zeros(m)
        w[list(self.rows)] = 1.0
        return w


@dataclass(frozen=True)
class AugmentedBlock:
    Ak: SparseMatrix
    selection: WeightSelection
    droptol_used: float = 0.0
    factor: CholeskyFactor | None = field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.Ak.nrows

    def cholesky(self) -> CholeskyFactor:
        return self.factor if self.factor is not None else dense_cholesky(self.Ak)


def drop_threshold(A: SparseMatrix) -> float:
    return EPS * A.max_abs()


def drop_small(A: SparseMatrix) -> SparseMatrix:
    """Remove entries smaller than machine epsilon times the largest magnitude."""
    return A.filter(np.abs(A.values) >= drop_threshold(A))


def structural_rank(M: SparseMatrix) -> int:
    """Size of a maximum matching between rows and columns of the pattern."""
    return PatternMatching.from_pattern(M.nrows, M.ncols, M.row_indices(), M.col_idx).size


def _outer_edges(B: SparseMatrix, i: int):
    cols, _ = B.row(i)
    return itertools.product(cols.tolist(), repeat=2)


def _sparsest_first(B: SparseMatrix, candidates=None) -> list[int]:
    nnz = B.row_nnz()
    rows = range(B.nrows) if candidates is None else candidates
    return sorted(rows, key=lambda i: (nnz[i], i))


def _augmented_pattern_rank(A_drop: SparseMatrix, B: SparseMatrix, rows) -> int:
    pm = PatternMatching(A_drop.nrows, A_drop.ncols)
    pm.add_edges(zip(A_drop.row_indices().tolist(), A_drop.col_idx.tolist()))
    for i in rows:
        pm.add_edges(_outer_edges(B, i))
    pm.augment_all()
    return pm.size


def select_weight_rows(A: SparseMatrix, B: SparseMatrix, prune: bool = True) -> WeightSelection:
    """Pick rows of B whose outer products give A full structural rank.

    Rows are scanned sparsest first (ties by index); a row is kept only if it
    strictly raises the structural rank of the running pattern.  With
    ``prune`` (the default) a final reverse pass discards accepted rows that
    later rows made redundant, so every returned row is necessary.

    Raises
    ------
    StructuralDeficiency
        If even all rows of B cannot reach full structural rank.
    """
    n, m = A.nrows, B.nrows
    if B.ncols != n:
        raise ValueError(f"B has {B.ncols} columns, A is {A.shape}")
    A_drop = drop_small(A)
    pm = PatternMatching(n, n)
    pm.add_edges(zip(A_drop.row_indices().tolist(), A_drop.col_idx.tolist()))
    pm.augment_all()
    accepted: list[int] = []
    for i in _sparsest_first(B):
        if pm.size == n:
            break
        new = pm.add_edges(_outer_edges(B, i))
        if not new:
            continue
        if pm.augment_all() > 0:
            accepted.append(i)
        else:
            pm.remove_edges(new)
    if pm.size < n:
        raise StructuralDeficiency(
            f"structural rank {pm.size} < {n} even after scanning all {m} rows of B")
    if prune and len(accepted) > 1:
        kept = list(accepted)
        for i in reversed(accepted):
            trial = [r for r in kept if r != i]
            if _augmented_pattern_rank(A_drop, B, trial) == n:
                kept = trial
        if len(kept) < len(accepted):
            log.debug("pruned %d redundant rows", len(accepted) - len(kept))
        accepted = kept
    return WeightSelection.partial(accepted, m)


def build_augmented(A: SparseMatrix, B: SparseMatrix, sel: WeightSelection,
                    certify: bool = True) -> AugmentedBlock:
    """Form A_k = A + B^T W_k B (or A + rho I for identity augmentation).

    With ``certify`` the block is factored densely; a failure raises
    :class:`NotPositiveDefinite` and the caller should enlarge the selection
    with :func:`ensure_numerical_rank`.
    """
    if sel.kind == "identity":
        Ak = A + SparseMatrix.identity(A.nrows, sel.rho)
    else:
        if sel.m is not None and sel.m != B.nrows:
            raise ValueError(f"selection built for m={sel.m}, B has {B.nrows} rows")
        Ak = A + triple_product(B, sel.rows)
    factor = dense_cholesky(Ak) if certify else None
    return AugmentedBlock(Ak, sel, drop_threshold(A), factor)


def _numerically_ok(Ak: SparseMatrix, cond_cap: float):
    try:
        factor = dense_cholesky(Ak)
    except NotPositiveDefinite:
        return None
    return factor if cond1(Ak, factor) <= cond_cap else None


def ensure_numerical_rank(blk: AugmentedBlock, B: SparseMatrix,
                          cond_cap: float = COND_CAP) -> AugmentedBlock:
    """Append the sparsest unused rows of B until A_k is SPD and well conditioned.

    Returns ``blk`` itself when it already factors with 1-norm condition
    number at most ``cond_cap``.
    """
    factor = _numerically_ok(blk.Ak, cond_cap)
    if factor is not None:
        if blk.factor is None:
            blk = AugmentedBlock(blk.Ak, blk.selection, blk.droptol_used, factor)
        return blk
    sel = blk.selection
    if sel.kind == "identity":
        raise StructuralDeficiency("identity augmentation cannot be enlarged with rows of B")
    chosen = set(sel.rows)
    Ak = blk.Ak
    extra = list(sel.extra_rows)
    for i in _sparsest_first(B, [r for r in range(B.nrows) if r not in chosen]):
        Ak = Ak + triple_product(B, [i])
        chosen.add(i)
        extra.append(i)
        factor = _numerically_ok(Ak, cond_cap)
        if factor is not None:
            kind = "full" if len(chosen) == B.nrows else sel.kind
            new_sel = WeightSelection(tuple(chosen), kind, B.nrows, extra_rows=tuple(extra))
            log.info("numerical phase appended %d rows", len(extra) - len(sel.extra_rows))
            return AugmentedBlock(Ak, new_sel, blk.droptol_used, factor)
    raise StructuralDeficiency("A_k stays singular or ill conditioned with every row of B")
