"""Exception types raised by the library."""


class CeiBenchError(Exception):
    """Base class for library errors."""


class InvalidInputError(CeiBenchError, ValueError):
    """Raised for malformed arguments (shape mismatch, non-finite values, ...)."""


class IllConditionedError(CeiBenchError):
    """Raised when a Gram matrix cannot be factorized even after jitter escalation."""


class NoIncumbentError(CeiBenchError):
    """Raised when CEI is requested but no feasible observation exists yet."""


class DegenerateSurfaceError(CeiBenchError):
    """Raised when every candidate of an acquisition surface is non-finite."""


class UnsatisfiableProblemError(CeiBenchError):
    """Raised when a generated problem has no feasible point after all retries."""


class UnsupportedDimensionError(CeiBenchError, ValueError):
    """Raised when an operation only supports some input dimensions."""


class EmptyPlotError(CeiBenchError):
    """Raised when a plot would contain no drawable points."""
