"""Exception types raised across the package."""


class SaddleError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SaddleError, ValueError):
    pass


class NotPositiveDefinite(SaddleError):
    """A Cholesky factorization met a nonpositive pivot."""


class BreakdownPivot(NotPositiveDefinite):
    """Incomplete Cholesky produced a nonpositive pivot after dropping."""


class NonpositiveDiagonal(SaddleError):
    pass


class StructuralDeficiency(SaddleError):
    """No choice of rows of B makes the augmented block nonsingular."""


class RankDeficientB(SaddleError):
    pass


class SingularReducedHessian(SaddleError):
    """Z^T A Z is singular, so the saddle-point matrix is singular too."""


class IndefiniteOperator(SaddleError):
    """CG found a direction of nonpositive curvature."""


class IterationLimit(SaddleError):
    pass


class GenerationFailure(SaddleError):
    pass


class ParseError(SaddleError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedField(ParseError):
    pass
