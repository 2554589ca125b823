"""Constrained expected improvement with exact GP surrogates, plus bound diagnostics."""
from .errors import (CeiBenchError, DegenerateSurfaceError, EmptyPlotError, IllConditionedError,
                     InvalidInputError, NoIncumbentError, UnsatisfiableProblemError,
                     UnsupportedDimensionError)
from .kernels import KernelSpec, matern, squared_exponential

__version__ = "0.1.0"

__all__ = ["KernelSpec", "matern", "squared_exponential", "CeiBenchError", "DegenerateSurfaceError",
           "EmptyPlotError", "IllConditionedError", "InvalidInputError", "NoIncumbentError",
           "UnsatisfiableProblemError", "UnsupportedDimensionError"]
