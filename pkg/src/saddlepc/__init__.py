"""Augmentation-based block-diagonal preconditioners for saddle-point systems
with a singular leading block."""
from .augmentation import (AugmentedBlock, WeightSelection, build_augmented, ensure_numerical_rank,
                           select_weight_rows, structural_rank)
from .errors import SaddleError
from .krylov import SolveReport, fgmres, minres, pcg
from .precond import BlockDiagPrecond, make_diagonal, make_ic, make_ideal, make_with_schur
from .saddle import BlockVector, SaddleSystem, check_wellposed
from .schur import bfbt_operator, exact_schur, schur_inverse_additive, wki_operator
from .sparse import SparseMatrix

__version__ = "0.1.0"

__all__ = ["AugmentedBlock", "BlockDiagPrecond", "BlockVector", "SaddleError", "SaddleSystem",
           "SolveReport", "SparseMatrix", "WeightSelection", "bfbt_operator", "build_augmented",
           "check_wellposed", "ensure_numerical_rank", "exact_schur", "fgmres", "make_diagonal",
           "make_ic", "make_ideal", "make_with_schur", "minres", "pcg", "schur_inverse_additive",
           "select_weight_rows", "structural_rank", "wki_operator"]
