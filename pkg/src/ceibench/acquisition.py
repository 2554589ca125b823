"""Expected improvement, probability of feasibility, and their product (CEI).

Minimization convention throughout: a point improves on the incumbent when its
objective value is *below* it, and a constraint ``c(x) <= lambda`` is satisfied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from . import gp
from .errors import InvalidInputError, NoIncumbentError

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# beyond this |z| the CDF is clamped to exactly 0 or 1
CDF_CLAMP = 8.0


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def norm_cdf(z):
    """Standard normal CDF via erfc, clamped to {0, 1} for |z| > 8."""
    z = np.asarray(z, dtype=float)
    out = 0.5 * erfc(-z / SQRT2)
    out = np.where(z > CDF_CLAMP, 1.0, out)
    return np.where(z < -CDF_CLAMP, 0.0, out)


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def tau(z):
    """``z * Phi(z) + phi(z)``, the standardized expected improvement.

    Uses the unclamped CDF so that very negative arguments stay positive.
    """
    z = np.asarray(z, dtype=float)
    return _scalar(z * 0.5 * erfc(-z / SQRT2) + norm_pdf(z))


def improvement(f_value, incumbent):
    return _scalar(np.maximum(np.asarray(incumbent, dtype=float) - f_value, 0.0))


def expected_improvement(mu, sigma, incumbent):
    """Closed-form EI for a minimization problem.

    ``sigma == 0`` returns the degenerate limit ``max(incumbent - mu, 0)``.
    Accepts scalars or broadcastable arrays.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise InvalidInputError("sigma must be non-negative")
    gain = incumbent - mu
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    z = gain / safe
    ei = gain * 0.5 * erfc(-z / SQRT2) + safe * norm_pdf(z)
    ei = np.where(pos, ei, np.maximum(gain, 0.0))
    # rounding can leave tiny negatives for very negative z
    return _scalar(np.maximum(ei, 0.0))


def probability_of_feasibility(mu_c, sigma_c, tolerance=0.0):
    """``Phi((tolerance - mu_c) / sigma_c)``; a 0/1 step when ``sigma_c == 0``."""
    mu_c = np.asarray(mu_c, dtype=float)
    sigma_c = np.asarray(sigma_c, dtype=float)
    if np.any(sigma_c < 0):
        raise InvalidInputError("sigma_c must be non-negative")
    if tolerance < 0:
        raise InvalidInputError("tolerance must be non-negative")
    pos = sigma_c > 0
    z = (tolerance - mu_c) / np.where(pos, sigma_c, 1.0)
    p = np.where(pos, norm_cdf(z), (mu_c <= tolerance).astype(float))
    return _scalar(p)


@dataclass(frozen=True)
class Incumbent:
    value: float = math.inf
    exists: bool = False

    @classmethod
    def from_observations(cls, f_values, c_values) -> "Incumbent":
        """Best objective among rows whose constraints are all ``<= 0``."""
        f_values = np.asarray(f_values, dtype=float)
        c_values = np.asarray(c_values, dtype=float).reshape(len(f_values), -1)
        feasible = np.all(c_values <= 0.0, axis=1)
        if not feasible.any():
            return cls()
        return cls(float(f_values[feasible].min()), True)


@dataclass
class AcquisitionContext:
    objective_model: gp.PosteriorModel
    constraint_models: list
    incumbent: Incumbent
    tolerance: float = 0.0
    # affine maps applied to raw values before they reach the models
    objective_shift: float = 0.0
    objective_scale: float = 1.0
    constraint_scales: list = field(default_factory=list)

    def __post_init__(self):
        if not self.constraint_models:
            raise InvalidInputError("need at least one constraint model")
        if self.tolerance < 0:
            raise InvalidInputError("tolerance must be non-negative")
        if not self.constraint_scales:
            self.constraint_scales = [1.0] * len(self.constraint_models)


def _pof_product(ctx: AcquisitionContext, X) -> np.ndarray:
    prod = np.ones(X.shape[0])
    for model, scale in zip(ctx.constraint_models, ctx.constraint_scales):
        mu, sd = gp.predict_many(model, X)
        prod = prod * probability_of_feasibility(mu, sd, ctx.tolerance / scale)
    return prod


def _batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def expected_improvement_at(ctx: AcquisitionContext, x):
    """Objective EI factor of CEI at ``x`` (model units)."""
    if not ctx.incumbent.exists:
        raise NoIncumbentError("EI needs a feasible incumbent")
    X, single = _batch(x)
    mu, sd = gp.predict_many(ctx.objective_model, X)
    inc = (ctx.incumbent.value - ctx.objective_shift) / ctx.objective_scale
    ei = np.asarray(expected_improvement(mu, sd, inc), dtype=float).reshape(-1)
    return float(ei[0]) if single else ei


def cei(ctx: AcquisitionContext, x):
    """``EI(x) * prod_i POF_i(x)`` at one point or a batch of points."""
    X, single = _batch(x)
    ei = expected_improvement_at(ctx, X)
    out = ei * _pof_product(ctx, X)
    return float(out[0]) if single else out


def pof_only(ctx: AcquisitionContext, x):
    """Feasibility-search acquisition used until a feasible point is observed."""
    X, single = _batch(x)
    out = _pof_product(ctx, X)
    return float(out[0]) if single else out
