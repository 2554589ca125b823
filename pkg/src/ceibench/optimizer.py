"""Derivative-free maximization of acquisition surfaces over a box.

A scrambled Sobol pool is scored in one vectorized call; the best few pool
points are then polished by a batched compass (coordinate pattern) search that
takes the best improving axis move each step and shrinks the step on failure.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateSurfaceError, InvalidInputError

DUPLICATE_TOL = 1e-9
INITIAL_STEP = 0.1
STEP_DECAY = 0.7


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size < 1:
            raise InvalidInputError("lower and upper must have the same non-zero length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidInputError("box bounds must be finite")
        if np.any(lo >= hi):
            raise InvalidInputError("need lower < upper in every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int) -> "Box":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, X, atol: float = 0.0) -> bool:
        X = np.atleast_2d(X)
        return bool(np.all(X >= self.lower - atol) and np.all(X <= self.upper + atol))

    def clip(self, X):
        return np.clip(X, self.lower, self.upper)

    def from_unit(self, U):
        return self.lower + U * self.width

    def to_unit(self, X):
        return (np.asarray(X, dtype=float) - self.lower) / self.width


@dataclass(frozen=True)
class OptimizerConfig:
    n_candidates: int | None = None
    n_refine_starts: int = 8
    refine_steps: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.n_candidates is not None and self.n_candidates < 1:
            raise InvalidInputError("n_candidates must be positive")
        if self.n_refine_starts < 1 or self.refine_steps < 0:
            raise InvalidInputError("n_refine_starts must be >= 1 and refine_steps >= 0")
        if self.n_candidates is not None and self.n_refine_starts > self.n_candidates:
            raise InvalidInputError("n_refine_starts cannot exceed n_candidates")

    def candidates_for(self, dim: int) -> int:
        if self.n_candidates is not None:
            return self.n_candidates
        return min(4096 * dim, 16384)


class MaximizeResult(NamedTuple):
    x: np.ndarray
    value: float
    candidate_index: int


def sobol_points(box: Box, n: int, seed: int) -> np.ndarray:
    """``n`` scrambled Sobol points mapped into ``box``."""
    sampler = qmc.Sobol(d=box.dim, scramble=True, seed=np.random.default_rng(seed))
    with warnings.catch_warnings():
        # balance warning for non powers of two is irrelevant here
        warnings.simplefilter("ignore", UserWarning)
        U = sampler.random(n)
    return box.from_unit(U)


def _finite_scores(objective, X) -> np.ndarray:
    vals = np.asarray(objective(X), dtype=float).reshape(-1)
    if vals.shape[0] != X.shape[0]:
        raise InvalidInputError("objective must return one value per row")
    return np.where(np.isfinite(vals), vals, -np.inf)


def nudge_duplicates(X: np.ndarray, existing, box: Box) -> np.ndarray:
    """Move rows lying on an ``existing`` point by one initial refinement step.

    The move is along the first coordinate, towards the interior of the box.
    """
    if existing is None or len(existing) == 0:
        return X
    existing = np.atleast_2d(np.asarray(existing, dtype=float))
    U = box.to_unit(X)
    E = box.to_unit(existing)
    X = X.copy()
    for start in range(0, U.shape[0], 4096):
        chunk = U[start:start + 4096]
        d = np.sqrt(((chunk[:, None, :] - E[None, :, :]) ** 2).sum(-1)).min(1)
        for i in np.nonzero(d <= DUPLICATE_TOL)[0]:
            row = start + i
            step = INITIAL_STEP * box.width[0]
            up = X[row, 0] + step
            X[row, 0] = up if up <= box.upper[0] else X[row, 0] - step
    return X


def is_duplicate(x, existing, box: Box) -> bool:
    if existing is None or len(existing) == 0:
        return False
    u = box.to_unit(np.asarray(x, dtype=float).reshape(1, -1))
    E = box.to_unit(np.atleast_2d(existing))
    return bool(np.sqrt(((E - u) ** 2).sum(1)).min() <= DUPLICATE_TOL)


def refine(objective, box: Box, starts: np.ndarray, values: np.ndarray, steps: int):
    """Batched compass search from each row of ``starts``; never worsens a start."""
    X = starts.copy()
    best = values.copy()
    n, d = X.shape
    step = np.tile(INITIAL_STEP * box.width, (n, 1))
    eye = np.eye(d)
    for _ in range(steps):
        # moves: (n, 2d, d)
        moves = np.concatenate([X[:, None, :] + step[:, None, :] * eye, X[:, None, :] - step[:, None, :] * eye], 1)
        moves = box.clip(moves)
        vals = _finite_scores(objective, moves.reshape(-1, d)).reshape(n, 2 * d)
        j = np.argmax(vals, axis=1)
        cand = vals[np.arange(n), j]
        better = cand > best
        X[better] = moves[better, j[better]]
        best[better] = cand[better]
        step[~better] *= STEP_DECAY
    return X, best


def maximize(objective: Callable[[np.ndarray], np.ndarray], box: Box, cfg: OptimizerConfig,
             avoid=None) -> MaximizeResult:
    """Maximize a vectorized ``objective`` over ``box``.

    ``objective`` maps an (n, d) array to n values.  Non-finite values are
    treated as missing.  Pool points within 1e-9 (relative to the box width)
    of a row of ``avoid`` are nudged before scoring.  Ties resolve to the
    lowest pool index, so the result is a deterministic function of
    ``cfg.seed``.
    """
    n = cfg.candidates_for(box.dim)
    pool = sobol_points(box, n, cfg.seed)
    pool = nudge_duplicates(pool, avoid, box)
    scores = _finite_scores(objective, pool)
    if not np.any(np.isfinite(scores)):
        raise DegenerateSurfaceError("objective is non-finite at every candidate")
    k = min(cfg.n_refine_starts, int(np.isfinite(scores).sum()))
    # stable sort on -score keeps the lowest index first among ties
    order = np.argsort(-scores, kind="stable")[:k]
    X, vals = refine(objective, box, pool[order], scores[order], cfg.refine_steps)
    tied = np.nonzero(vals == vals.max())[0]
    win = int(tied[np.argmin(order[tied])])
    return MaximizeResult(X[win].copy(), float(vals[win]), int(order[win]))
