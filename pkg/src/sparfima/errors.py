"""Exception types shared across the package."""


class SparfimaError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SparfimaError, ValueError):
    """A parameter leaves the domain where the operator is real and invertible,
    e.g. a spectrum shift 1 - a*lambda_i that is not strictly positive."""


class DegenerateInputError(SparfimaError, ValueError):
    """Input data is degenerate for the requested computation
    (constant field for Moran's I, duplicate coordinates for inverse distance)."""


class NumericalError(SparfimaError, RuntimeError):
    """A numerical routine failed: eigensolver non-convergence,
    ill-conditioned eigenbasis with fallback disabled, singular system."""


class UnsupportedMatrixError(SparfimaError, ValueError):
    """The weight matrix violates a structural requirement,
    e.g. a complex spectrum where a real one is required."""


class UnsupportedLayoutError(SparfimaError, ValueError):
    """The site layout does not support the requested operation,
    e.g. influence profiles on irregular point sets."""


class ConvergenceError(SparfimaError, RuntimeError):
    """An iterative computation hit its term/iteration cap before reaching
    tolerance. ``achieved`` carries the best bound reached."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ParseError(SparfimaError, ValueError):
    """A data file could not be parsed. ``line`` is the 1-based offending
    line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
