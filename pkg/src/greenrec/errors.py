"""Exception hierarchy shared by every greenrec module."""


class GreenrecError(Exception):
    """Base class for all package errors."""


class DivisionError(GreenrecError, ArithmeticError):
    """Exact polynomial division left a nonzero remainder."""


class ParseError(GreenrecError, ValueError):
    """Malformed polynomial expression or PDE document.

    ``location`` is a character offset for expressions or a dotted path
    (``coefficients[2].multi_index``) for documents.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class InternalError(GreenrecError, RuntimeError):
    """An invariant of the derivation pipeline was violated."""


class DomainError(GreenrecError, ValueError):
    """Input outside the mathematical domain (for example the origin)."""


class CapabilityError(GreenrecError):
    """The requested feature is unavailable for this kernel."""


class DegenerateRecurrenceError(GreenrecError):
    """Every recurrence coefficient vanished after specialization."""


class SingularStepError(GreenrecError, ZeroDivisionError):
    """The leading recurrence coefficient is zero at a concrete (n, x)."""

    def __init__(self, n, message=None):
        self.n = n
        super().__init__(message or f"leading recurrence coefficient vanishes at n={n}")


class ConfigError(GreenrecError, ValueError):
    """Invalid configuration value."""


class GeometryError(GreenrecError, ValueError):
    """Degenerate geometry, such as a source placed on an expansion center."""


class ReferenceNotConverged(GreenrecError):
    """Reference quadrature failed its self-convergence certificate."""

    def __init__(self, change, tol):
        self.change = change
        self.tol = tol
        super().__init__(f"reference changed by {change:.3e} under oversampling (tolerance {tol:.1e})")


class DegenerateFitError(GreenrecError, ValueError):
    """A least-squares fit has fewer than two usable samples."""
