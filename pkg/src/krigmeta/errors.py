"""Exception hierarchy shared by all modules."""


class KrigmetaError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(KrigmetaError, ValueError):
    pass


class NotPositiveDefinite(KrigmetaError, ArithmeticError):
    """Cholesky factorization met a non-positive pivot.

    Parameters
    ----------
    pivot : int
        Zero-based index of the failing diagonal pivot.
    """

    def __init__(self, pivot: int):
        self.pivot = int(pivot)
        super().__init__(f"matrix is not positive definite (pivot {self.pivot})")


class DegenerateResponse(KrigmetaError, ValueError):
    """The response is constant, so the process variance is zero."""


class TooFewPoints(KrigmetaError, ValueError):
    pass


class NonFiniteInput(KrigmetaError, ValueError):
    pass


class InvalidConfig(KrigmetaError, ValueError):
    pass


class InfeasibleStart(KrigmetaError, ValueError):
    pass


class AllColumnsConstant(KrigmetaError, ValueError):
    pass


class EmptyInput(KrigmetaError, ValueError):
    pass


class ConstantVector(KrigmetaError, ValueError):
    """Pearson correlation is undefined for a constant vector."""


class OneClassOnly(KrigmetaError, ValueError):
    pass


class SingularInformation(KrigmetaError, ArithmeticError):
    """The logistic information matrix is singular (collinear features)."""


class InvalidSpec(KrigmetaError, ValueError):
    pass
