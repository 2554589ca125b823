"""Exact zero-mean Gaussian-process regression.

Noise-free fits factorize ``K + j I`` where the jitter ``j`` is the smallest
rung of a fixed ladder that lets the Cholesky factorization succeed.  Noisy
fits factorize ``K + (noise_variance + j) I`` and try ``j = 0`` first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from . import kernels
from .errors import IllConditionedError, InvalidInputError
from .kernels import KernelSpec

JITTER_LADDER = (1e-12, 1e-10, 1e-8, 1e-6)
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ObservationSet:
    """Training inputs ``X`` (t, d) and one function's observations ``y`` (t,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
            raise InvalidInputError(f"need |X| = |y| >= 1, got {X.shape[0]} and {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidInputError("observations must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.y.shape[0]


@dataclass
class PosteriorModel:
    """Factorized GP state.

    ``chol`` is the lower Cholesky factor of ``K + (noise_variance + jitter) I``
    and ``alpha`` solves that system for ``y``.  The model is never mutated
    after :func:`fit` apart from ``clamp_events``, which counts predictions
    whose variance rounded below zero.
    """

    spec: KernelSpec
    X: np.ndarray
    y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    noise_variance: float = 0.0
    clamp_events: int = field(default=0, compare=False)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def predict(self, x):
        return predict(self, x)


def _closest_pair(X: np.ndarray) -> tuple[int, int]:
    if X.shape[0] < 2:
        return (0, 0)
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    i, j = np.unravel_index(np.argmin(d2), d2.shape)
    return (int(min(i, j)), int(max(i, j)))


def _factorize(K: np.ndarray, X: np.ndarray, noise_variance: float):
    t = K.shape[0]
    scale = np.trace(K) / t
    ladder = [j * scale for j in JITTER_LADDER]
    if noise_variance > 0:
        ladder = [0.0] + ladder
    for jitter in ladder:
        A = K.copy()
        A[np.diag_indices_from(A)] += noise_variance + jitter
        try:
            return cholesky(A, lower=True, check_finite=False), jitter
        except LinAlgError:
            continue
    i, j = _closest_pair(X)
    raise IllConditionedError(
        f"Cholesky failed after jitter {ladder[-1]:.1e}; closest points are #{i} and #{j}"
    )


def fit(spec: KernelSpec, data: ObservationSet, noise_variance: float = 0.0) -> PosteriorModel:
    """Condition the zero-mean GP prior on ``data``."""
    if noise_variance < 0 or not np.isfinite(noise_variance):
        raise InvalidInputError("noise_variance must be a non-negative finite number")
    K = kernels.gram(spec, data.X)
    L, jitter = _factorize(K, data.X, noise_variance)
    alpha = cho_solve((L, True), data.y, check_finite=False)
    return PosteriorModel(spec, data.X, data.y, L, alpha, float(jitter), float(noise_variance))


def predict_many(model: PosteriorModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation at each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.dim:
        raise InvalidInputError(f"query dimension {X.shape[1]} != model dimension {model.dim}")
    Ks = kernels.cross(model.spec, X, model.X)
    mu = Ks @ model.alpha
    V = solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = 1.0 - np.einsum("ij,ij->j", V, V)
    neg = var < 0
    if neg.any():
        model.clamp_events += int(neg.sum())
        var[neg] = 0.0
    return mu, np.sqrt(var)


def predict(model: PosteriorModel, x):
    """Posterior ``(mu, sigma)``.

    A single point (1-d input) gives two floats; a 2-d array of points gives
    two arrays.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != model.dim:
            raise InvalidInputError(f"query dimension {x.shape[0]} != model dimension {model.dim}")
        mu, sd = predict_many(model, x[None, :])
        return float(mu[0]), float(sd[0])
    return predict_many(model, x)


def _lml_from_model(model: PosteriorModel) -> float:
    t = model.y.shape[0]
    data_fit = float(model.y @ model.alpha)
    log_det = 2.0 * float(np.sum(np.log(np.diag(model.chol))))
    return -0.5 * data_fit - 0.5 * log_det - 0.5 * t * LOG_2PI


def log_marginal_likelihood(spec: KernelSpec, data: ObservationSet, noise_variance: float = 0.0) -> float:
    """Log evidence ``log N(y | 0, K + (noise + jitter) I)``."""
    return _lml_from_model(fit(spec, data, noise_variance))


def fit_mle(template: KernelSpec, data: ObservationSet, noise_variance: float, l_grid) -> PosteriorModel:
    """Grid-search maximum-likelihood length scale.

    ``template`` supplies the family (and Matérn nu); its own length scale is
    ignored.  Ties go to the smaller length scale.
    """
    grid = sorted(float(l) for l in l_grid)
    if not grid:
        raise InvalidInputError("l_grid must be non-empty")
    best, best_score = None, -np.inf
    for l in grid:
        try:
            model = fit(template.with_length_scale(l), data, noise_variance)
        except IllConditionedError:
            continue
        score = _lml_from_model(model)
        if score > best_score:
            best, best_score = model, score
    if best is None:
        raise IllConditionedError("every length scale on the grid failed to factorize")
    return best
