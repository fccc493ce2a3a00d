"""Exception hierarchy shared by the package."""


class SkeGTDError(Exception):
    """Base class for all package errors."""


class DomainError(SkeGTDError, ValueError):
    """An argument lies outside the domain of a function or parameter space."""


class MomentNotFiniteError(SkeGTDError, ArithmeticError):
    """Requested moment does not exist (order k >= alpha * beta)."""

    def __init__(self, k, alpha, beta):
        self.k = k
        self.alpha = alpha
        self.beta = beta
        super().__init__(
            f"moment of order {k} requires alpha*beta > {k}, got {alpha * beta:.6g}"
        )


class SeriesNonConvergence(SkeGTDError, ArithmeticError):
    """A truncated series did not meet its tolerance; carries the partial sum."""

    def __init__(self, message, partial=None, terms=None):
        self.partial = partial
        self.terms = terms
        super().__init__(message)


class FitError(SkeGTDError, RuntimeError):
    """An estimator failed to produce a usable answer."""


class NotPositiveDefiniteError(SkeGTDError, ArithmeticError):
    def __init__(self, eigenvalues):
        self.eigenvalues = eigenvalues
        super().__init__(f"information matrix is not positive definite: {eigenvalues}")
