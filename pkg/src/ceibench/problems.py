"""Benchmark and synthetic constrained problems.

Every objective and constraint is a vectorized callable mapping an (n, d)
array to n values; a point is feasible when all constraints are ``<= 0``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from . import kernels
from .errors import InvalidInputError, UnsatisfiableProblemError, UnsupportedDimensionError
from .kernels import KernelSpec
from .optimizer import Box, refine, sobol_points

N_BASIS = 100
N_ANCHORS = 1000
ANCHOR_JITTERS = (1e-10, 1e-8, 1e-6)
MAX_RESAMPLES = 10
DEFAULT_SEARCH = 2**20


@dataclass
class Problem:
    """A box-constrained problem ``min f(x) s.t. c_i(x) <= 0``.

    ``f_star`` is the reference optimum used for regret.  For benchmarks it is
    certified to ~1e-12; ``f_star_reported`` keeps the rounded value published
    with the problem.  Synthetic problems set ``f_star_estimated``.
    """

    name: str
    box: Box
    objective: Callable
    constraints: list
    f_star: float | None = None
    x_star: np.ndarray | None = None
    f_star_reported: float | None = None
    f_star_estimated: bool = False
    rkhs_norm_f: float | None = None
    rkhs_norm_c: list | None = None
    kernel_f: KernelSpec | None = None
    kernel_c: KernelSpec | None = None
    max_abs_f: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def evaluate_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Objective (n,) and constraint (n, m) values for each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise InvalidInputError(f"expected {self.dim}-d points, got {X.shape[1]}-d")
        if not self.box.contains(X, atol=1e-12 * float(self.box.width.max())):
            raise InvalidInputError("point outside the problem box")
        f = np.asarray(self.objective(X), dtype=float).reshape(-1)
        C = np.column_stack([np.asarray(c(X), dtype=float).reshape(-1) for c in self.constraints])
        return f, C


def evaluate(problem: Problem, x) -> tuple[float, list, bool]:
    """Noise-free ``(f, [c_1..c_m], feasible)`` at a single point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    f, C = problem.evaluate_many(x)
    c = [float(v) for v in C[0]]
    return float(f[0]), c, all(v <= 0.0 for v in c)


# -- benchmarks ---------------------------------------------------------------

def _p1_f(X):
    return np.sin(X[:, 0]) + X[:, 1]


def _p1_c(X):
    return np.sin(X[:, 0]) * np.sin(X[:, 1]) + 0.95


def _p2_f(X):
    return X[:, 0] + X[:, 1]


def _p2_c1(X):
    x1, x2 = X[:, 0], X[:, 1]
    return -0.5 * np.sin(2 * np.pi * (x1**2 - 2 * x2)) - x1 - 2 * x2 + 1.5


def _disk_c(X):
    return X[:, 0] ** 2 + X[:, 1] ** 2 - 1.5


_P3_E = np.array([1.0, 1.2, 3.0, 3.2])
_P3_P = np.array([
    [0.131, 0.232, 0.234, 0.404],
    [0.169, 0.413, 0.145, 0.882],
    [0.556, 0.830, 0.352, 0.873],
    [0.012, 0.373, 0.288, 0.574],
])
_P3_A = np.array([
    [10, 0.05, 3, 17],
    [3, 10, 3.5, 8],
    [17, 17, 1.7, 0.05],
    [3.5, 0.1, 10, 10],
])


def _p3_f(X):
    return X.sum(1)


def _p3_c(X):
    # columns of A and P index the four exponential terms
    diff = X[:, :, None] - _P3_P[None, :, :]
    return 1.1 - (_P3_E * np.exp(-(_P3_A[None] * diff**2).sum(1))).sum(1)


_HART_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HART_A = np.array([
    [10, 3.0, 17, 3.5, 1.7, 8.0],
    [0.05, 10, 17, 0.1, 8.0, 14],
    [3.0, 3.5, 1.7, 10, 17, 8.0],
    [17, 8.0, 0.05, 10, 0.1, 14],
])
_HART_P = np.array([
    [0.131, 0.170, 0.557, 0.012, 0.828, 0.587],
    [0.233, 0.414, 0.831, 0.374, 0.100, 0.999],
    [0.235, 0.145, 0.352, 0.288, 0.305, 0.665],
    [0.405, 0.883, 0.873, 0.574, 0.109, 0.038],
])


def _p4_f(X):
    diff = X[:, None, :] - _HART_P[None]
    return -(_HART_ALPHA * np.exp(-(_HART_A[None] * diff**2).sum(2))).sum(1)


def _p4_c(X):
    return X[:, :4].sum(1) - 3.0


def _p5_f(X):
    x1, x2 = X[:, 0], X[:, 1]
    return 100.0 * (x2 - x1**2) ** 2 + (1.0 - x1) ** 2


def _p5_c1(X, literal=False):
    x1, x2 = X[:, 0], X[:, 1]
    if literal:
        return np.sqrt(x1**2 + x1**2) - 4.0
    return np.sqrt(x1**2 + x2**2) - 4.0


# Optima located by multi-start SLSQP, then nudged along one coordinate until
# every constraint is <= 0 exactly; f_star is the objective at that point.
_CERTIFIED = {
    1: ([4.712388971199991, 1.2532358975043478], 0.25323589750434783),
    2: ([0.1951226885590496, 0.40466536345201176], 0.5997880520110613),
    3: ([0.0, 0.0, 0.0, 0.05167620750673273], 0.05167620750673273),
    4: ([0.2018053752478688, 0.149938647547349, 0.4767070122496926,
         0.275051623284114, 0.31193222250207586, 0.6570994042249317], -3.3213044240046132),
    5: ([0.9072339604983191, 0.8227554563286315], 0.008615650659908436),
}
REPORTED_F_STAR = {1: 0.25, 2: 0.6, 3: 0.0, 4: -3.32, 5: 0.0}


def make_benchmark(problem_id: int, p5_literal_constraint: bool = False) -> Problem:
    """One of the five standard test problems, ``problem_id`` in 1..5."""
    if problem_id == 1:
        name, box, f, cs = "p1", Box([0, 0], [6, 6]), _p1_f, [_p1_c]
    elif problem_id == 2:
        name, box, f, cs = "p2", Box([0, 0], [1, 1]), _p2_f, [_p2_c1, _disk_c]
    elif problem_id == 3:
        name, box, f, cs = "p3", Box.unit(4), _p3_f, [_p3_c]
    elif problem_id == 4:
        name, box, f, cs = "p4", Box.unit(6), _p4_f, [_p4_c]
    elif problem_id == 5:
        c1 = partial(_p5_c1, literal=True) if p5_literal_constraint else _p5_c1
        name, box, f, cs = "p5", Box([-5, 0], [10, 15]), _p5_f, [c1, _disk_c]
    else:
        raise InvalidInputError(f"unknown benchmark id {problem_id!r}; expected 1..5")
    x_star, f_star = _CERTIFIED[problem_id]
    meta = {"kind": "benchmark", "id": problem_id, "dim": box.dim}
    if problem_id == 5:
        meta["p5_literal_constraint"] = bool(p5_literal_constraint)
    return Problem(name, box, f, cs, f_star=f_star, x_star=np.array(x_star),
                   f_star_reported=REPORTED_F_STAR[problem_id], meta=meta)


# -- synthetic ----------------------------------------------------------------

@dataclass
class KernelExpansion:
    """``x -> sum_j weights[j] * k(x, basis[j])`` with RKHS norm ``sqrt(w'Kw)``."""

    spec: KernelSpec
    basis: np.ndarray
    weights: np.ndarray
    norm: float = 0.0

    def __post_init__(self):
        if not self.norm:
            K = kernels.gram(self.spec, self.basis)
            self.norm = float(math.sqrt(max(self.weights @ K @ self.weights, 0.0)))

    def __call__(self, X, chunk: int = 8192):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], chunk):
            out[s:s + chunk] = kernels.cross(self.spec, X[s:s + chunk], self.basis) @ self.weights
        return out


# alias matching the domain vocabulary: a sampled RKHS function
RkhsSample = KernelExpansion


def _generator(seed: int, retry: int) -> np.random.Generator:
    # counter-based bit generator: identical streams on every platform
    return np.random.Generator(np.random.Philox(key=np.array([seed, retry], dtype=np.uint64)))


def sample_rkhs_function(spec: KernelSpec, box: Box, rng: np.random.Generator,
                         n_basis: int = N_BASIS) -> KernelExpansion:
    basis = box.from_unit(rng.random((n_basis, box.dim)))
    weights = rng.standard_normal(n_basis)
    return KernelExpansion(spec, basis, weights)


def sample_gp_function(spec: KernelSpec, box: Box, rng: np.random.Generator,
                       n_anchors: int = N_ANCHORS):
    """Prior draw at uniform anchors, extended by noise-free interpolation.

    Returns ``(function, anchor_values, jitter)``.  The draw is represented by
    weights ``alpha = L^{-T} z`` with ``L L^T = K + jI``, so the interpolant
    ``k(x)' alpha`` takes exactly the returned values at the anchors.
    """
    anchors = box.from_unit(rng.random((n_anchors, box.dim)))
    K = kernels.gram(spec, anchors)
    z = rng.standard_normal(n_anchors)
    for jitter in ANCHOR_JITTERS:
        try:
            L = cholesky(K + jitter * np.eye(n_anchors), lower=True, check_finite=False)
            break
        except LinAlgError:
            continue
    else:
        raise UnsatisfiableProblemError("anchor Gram matrix could not be factorized")
    alpha = solve_triangular(L.T, z, lower=False, check_finite=False)
    fn = KernelExpansion(spec, anchors, alpha)
    return fn, K @ alpha, jitter


def estimate_optimum(problem: Problem, n_search: int = DEFAULT_SEARCH, seed: int = 0,
                     n_refine: int = 8, refine_steps: int = 60):
    """Dense seeded search over the feasible set plus compass refinement.

    Returns ``(f_star, x_star)`` or ``None`` when no search point is feasible.
    """
    pool = sobol_points(problem.box, n_search, seed)
    f, C = _evaluate_chunked(problem, pool)
    feasible = np.all(C <= 0.0, axis=1)
    if not feasible.any():
        return None
    idx = np.nonzero(feasible)[0]
    order = idx[np.argsort(f[idx], kind="stable")[:n_refine]]

    def score(X):
        fx, cx = problem.evaluate_many(X)
        return np.where(np.all(cx <= 0.0, axis=1), -fx, -np.inf)

    X, vals = refine(score, problem.box, pool[order], -f[order], refine_steps)
    best = int(np.argmax(vals))
    return float(-vals[best]), X[best].copy()


def _evaluate_chunked(problem: Problem, X, chunk: int = 16384):
    fs, Cs = [], []
    for s in range(0, X.shape[0], chunk):
        f, C = problem.evaluate_many(X[s:s + chunk])
        fs.append(f)
        Cs.append(C)
    return np.concatenate(fs), np.concatenate(Cs)


def _synthetic(kind: str, spec_f: KernelSpec, spec_c: KernelSpec, dim: int, seed: int,
               n_search: int) -> Problem:
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    box = Box.unit(dim)
    meta = {"kind": kind, "seed": int(seed), "dim": int(dim),
            "kernel_f": spec_f.to_dict(), "kernel_c": spec_c.to_dict()}
    for retry in range(MAX_RESAMPLES + 1):
        rng = _generator(seed, retry)
        if kind == "rkhs":
            f = sample_rkhs_function(spec_f, box, rng)
            c = sample_rkhs_function(spec_c, box, rng)
            extra = {"rkhs_norm_f": f.norm, "rkhs_norm_c": [c.norm]}
        else:
            f, f_anchor, jf = sample_gp_function(spec_f, box, rng)
            c, _, jc = sample_gp_function(spec_c, box, rng)
            extra = {"max_abs_f": float(np.abs(f_anchor).max())}
            meta_j = {"anchor_jitter_f": jf, "anchor_jitter_c": jc}
        name = f"{kind}-{spec_f.label}-d{dim}-s{seed}"
        problem = Problem(name, box, f, [c], kernel_f=spec_f, kernel_c=spec_c,
                          f_star_estimated=True, meta=dict(meta, resample=retry), **extra)
        if kind == "gp":
            problem.meta.update(meta_j)
        found = estimate_optimum(problem, n_search=n_search, seed=seed + retry)
        if found is not None:
            problem.f_star, problem.x_star = found
            return problem
    raise UnsatisfiableProblemError(
        f"no feasible search point after {MAX_RESAMPLES} resamples (seed {seed})")


def sample_rkhs_problem(spec_f: KernelSpec, spec_c: KernelSpec, dim: int, seed: int,
                        n_search: int = DEFAULT_SEARCH) -> Problem:
    """Objective and one constraint drawn as random kernel expansions on [0,1]^dim."""
    return _synthetic("rkhs", spec_f, spec_c, dim, seed, n_search)


def sample_gp_problem(spec_f: KernelSpec, spec_c: KernelSpec, dim: int, seed: int,
                      n_search: int = DEFAULT_SEARCH) -> Problem:
    """Objective and one constraint drawn from the GP prior at 1000 anchors."""
    return _synthetic("gp", spec_f, spec_c, dim, seed, n_search)


def export_grid(problem: Problem, resolution: int) -> str:
    """CSV text ``x1,x2,f,c1..cm`` on a uniform grid (x1 outer, x2 inner)."""
    if problem.dim != 2:
        raise UnsupportedDimensionError(f"grid export needs a 2-d problem, got d={problem.dim}")
    if resolution < 2:
        raise InvalidInputError("resolution must be >= 2")
    g1 = np.linspace(problem.box.lower[0], problem.box.upper[0], resolution)
    g2 = np.linspace(problem.box.lower[1], problem.box.upper[1], resolution)
    X = np.array([(a, b) for a in g1 for b in g2])
    f, C = problem.evaluate_many(X)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x1", "x2", "f"] + [f"c{i + 1}" for i in range(problem.n_constraints)])
    for x, fv, cv in zip(X, f, C):
        w.writerow([repr(float(x[0])), repr(float(x[1])), repr(float(fv))] + [repr(float(v)) for v in cv])
    return buf.getvalue()


def problem_from_meta(meta: dict, n_search: int = DEFAULT_SEARCH) -> Problem:
    """Rebuild a problem from its serialized identity."""
    kind = meta.get("kind")
    if kind == "benchmark":
        return make_benchmark(int(meta["id"]), bool(meta.get("p5_literal_constraint", False)))
    if kind in ("rkhs", "gp"):
        spec_f = KernelSpec.from_dict(meta["kernel_f"])
        spec_c = KernelSpec.from_dict(meta["kernel_c"])
        return _synthetic(kind, spec_f, spec_c, int(meta["dim"]), int(meta["seed"]), n_search)
    raise InvalidInputError(f"unknown problem kind {kind!r}")
