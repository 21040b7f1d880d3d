"""Exception hierarchy shared by every module of the package."""


class FinslerError(Exception):
    """Base class for all errors raised by finsler_means."""


class InvalidInputError(FinslerError, ValueError):
    pass


class DegenerateReferenceVectorError(InvalidInputError):
    """A reference vector V = 0 was given where g_V is undefined."""


class OutOfComparisonRangeError(InvalidInputError):
    """sqrt(k) * r reached pi, where the comparison bounds stop making sense."""


class NondifferentiablePointError(FinslerError):
    """The objective is not differentiable at the requested point."""


class SingularMajorantError(FinslerError):
    """The Hessian majorant is unbounded (p < 2 with an atom in the region)."""


class NumericalFailureError(FinslerError, ArithmeticError):
    """An inner solver did not converge.

    ``residual`` carries the best residual that was reached.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DomainEscapeError(NumericalFailureError):
    """A geodesic left the chart domain at time ``exit_time``."""

    def __init__(self, message, exit_time=None):
        super().__init__(message)
        self.exit_time = exit_time


class InconsistentBoundsError(NumericalFailureError):
    """The descent inequality failed, so the supplied curvature bounds are wrong."""
