"""Regret, information gain, and computable right-hand sides of the regret bounds.

Bound quantities are evaluated in log space: the constants involved
(``tau(B)/tau(-B)`` and ``1/Phi(-B_c)``) overflow double precision for the
RKHS norms that random kernel expansions typically have.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.special import erfcx, log_ndtr

from . import gp, kernels
from .acquisition import expected_improvement, improvement
from .errors import IllConditionedError, InvalidInputError
from .kernels import KernelSpec
from .trace import RegretTrace

C_ALPHA = (1.0 + 2.0 * math.pi) / (2.0 * math.pi)
ABS_SLACK = 1e-9
JITTER_SLACK = 1e-6
DEFAULT_NOISE_FOR_CGAMMA = 0.01


# -- scalar helpers -------------------------------------------------------------

def log_tau(z: float) -> float:
    """``log(z Phi(z) + phi(z))`` without underflow for very negative z."""
    z = float(z)
    if z >= 0:
        return math.log(z * 0.5 * math.erfc(-z / math.sqrt(2)) + math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi))
    # tau(z) = exp(-z^2/2) * (1/sqrt(2 pi) + z/2 * erfcx(-z/sqrt 2))
    inner = 1.0 / math.sqrt(2 * math.pi) + 0.5 * z * float(erfcx(-z / math.sqrt(2)))
    if inner <= 0:
        # asymptotic tail: tau(z) ~ phi(z) / z^2
        return -0.5 * z * z - 0.5 * math.log(2 * math.pi) - 2.0 * math.log(-z)
    return -0.5 * z * z + math.log(inner)


def c_tau(bound: float) -> float:
    """``tau(B) / tau(-B)``; may be ``inf``."""
    return _safe_exp(log_tau(bound) - log_tau(-bound))


def log_c_tau(bound: float) -> float:
    return log_tau(bound) - log_tau(-bound)


def C_gamma(noise_variance: float) -> float:
    return 2.0 / math.log(1.0 + 1.0 / noise_variance)


def pi_t(t: int) -> float:
    return math.pi**2 * t * t / 6.0


def beta_bayes(delta: float) -> float:
    """Confidence multiplier used for the EI ratio in the Bayesian bound."""
    return 2.0 * math.log(6.0 * C_ALPHA / delta)


def beta_t_bayes(t: int, delta: float) -> float:
    return 2.0 * math.log(3.0 * pi_t(t) / delta)


def _safe_exp(v: float) -> float:
    return math.inf if v > 709.0 else math.exp(v)


# -- regret -------------------------------------------------------------------

def simple_regret(trace: RegretTrace, f_star: float):
    """``[(index, f_plus - f_star), ...]`` for every sample index with an incumbent.

    Returns ``(series, has_incumbent)``.
    """
    series = [(r.index, r.f_plus - f_star) for r in trace.records if r.f_plus is not None]
    return series, bool(series)


def iterations_to_reach(series, eps: float) -> int | None:
    """First index whose regret is ``<= eps``."""
    for t, r in series:
        if r <= eps:
            return t
    return None


# -- information gain -----------------------------------------------------------

def info_gain_of_set(spec: KernelSpec, X, noise_variance: float) -> float:
    """Mutual information ``0.5 log det(I + K / noise)`` of noisy observations at X."""
    if noise_variance <= 0:
        raise InvalidInputError("noise_variance must be positive")
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return 0.0
    K = kernels.gram(spec, np.atleast_2d(X))
    A = np.eye(K.shape[0]) + K / noise_variance
    try:
        L = cholesky(A, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise IllConditionedError(str(exc)) from exc
    return float(np.sum(np.log(np.diag(L))))


def noisy_posterior_sds(spec: KernelSpec, X, noise_variance: float) -> np.ndarray:
    """``sigma~_{t-1}(x_t)`` for t = 1..T along the sequence ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty(X.shape[0])
    out[0] = 1.0
    K = kernels.gram(spec, X)
    for t in range(1, X.shape[0]):
        A = K[:t, :t] + noise_variance * np.eye(t)
        L = cholesky(A, lower=True, check_finite=False)
        v = solve_triangular(L, K[:t, t], lower=True, check_finite=False)
        out[t] = math.sqrt(max(1.0 - v @ v, 0.0))
    return out


def greedy_max_info_gain(spec: KernelSpec, candidate_grid, T: int, noise_variance: float):
    """Greedy variance-maximization approximation of the maximum information gain.

    Returns ``(gammas, picks)`` where ``gammas[t-1]`` is the information gain
    of the first t picks and ``picks`` are candidate indices (lowest index on ties).
    """
    G = np.atleast_2d(np.asarray(candidate_grid, dtype=float))
    if T > G.shape[0]:
        raise InvalidInputError("need at least T candidates")
    if noise_variance <= 0:
        raise InvalidInputError("noise_variance must be positive")
    var = np.ones(G.shape[0])
    rows = np.empty((T, G.shape[0]))
    gammas, picks = [], []
    total = 0.0
    for t in range(T):
        s = int(np.argmax(var))
        v_s = var[s]
        k_s = kernels.cross(spec, G[s:s + 1], G)[0]
        row = (k_s - rows[:t, s] @ rows[:t]) / math.sqrt(v_s + noise_variance)
        rows[t] = row
        var = np.maximum(var - row * row, 0.0)
        total += 0.5 * math.log1p(v_s / noise_variance)
        gammas.append(total)
        picks.append(s)
    return np.array(gammas), picks


def variance_sum_check(spec: KernelSpec, X, noise_variance: float):
    """Compare ``sum_t sigma~_{t-1}(x_t)`` with ``sqrt(C_gamma * T * I(X))``.

    Returns ``(lhs, rhs, ok)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lhs = float(noisy_posterior_sds(spec, X, noise_variance).sum())
    info = info_gain_of_set(spec, X, noise_variance)
    rhs = math.sqrt(C_gamma(noise_variance) * X.shape[0] * info)
    return lhs, rhs, lhs <= rhs + 1e-8


# -- regret bounds ------------------------------------------------------------

@dataclass
class BoundReport:
    t: int
    t_k: int | None
    rhs_frequentist: float | None
    rhs_bayesian: float | None
    log10_rhs: float | None
    B_f: float
    B_c: float
    c_tauB: float
    gamma_t: float | None
    info_gain_actual: float | None
    regret: float | None
    violations: int
    ok: bool
    window_exhausted: bool
    label: str
    trial: int | None = None

    def to_json(self) -> str:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "BoundReport":
        d = json.loads(line)
        for k, v in d.items():
            if v in ("inf", "-inf", "nan"):
                d[k] = float(v)
        return cls(**d)


def _window(trace: RegretTrace, t: int, condition):
    """First ``t_k`` in ``[k, 2k]`` (k = floor(t/2)) meeting ``condition``.

    Only indices whose next sample was chosen by CEI qualify; the bound's
    argument compares CEI at ``x_{t_k+1}`` with CEI at the optimum.
    """
    k = t // 2
    for tk in range(max(k, 1), 2 * k + 1):
        nxt = trace.record_at(tk + 1)
        if nxt is None or nxt.acquisition != "cei":
            continue
        if trace.incumbent_at(tk) is None or nxt.sigma_f_at_next is None:
            continue
        if condition(tk, k, nxt):
            return tk
    return None


def _regret_at(trace: RegretTrace, t: int, f_star: float | None):
    rec = trace.record_at(t)
    if rec is None or rec.f_plus is None:
        return None
    if f_star is None:
        return rec.regret
    return rec.f_plus - f_star


def frequentist_bound_rhs(trace: RegretTrace, B_f: float, B_c: float, t: int,
                          f_star: float | None = None, label: str = "frequentist") -> BoundReport:
    """Regret bound for RKHS objectives/constraints with norms ``B_f``, ``B_c``.

    ``t`` is a 1-based sample index.  The chosen ``t_k`` is the first index in
    ``[floor(t/2), 2 floor(t/2)]`` with a small incumbent decrease and
    ``f_plus(t_k+1) <= f(x_{t_k+1})``.
    """
    if t < 4:
        raise InvalidInputError("the bound needs t >= 4")
    if B_f <= 0 or B_c <= 0:
        raise InvalidInputError("B_f and B_c must be positive")

    def cond(tk, k, nxt):
        fk, fk1 = trace.incumbent_at(tk), nxt.f_plus
        return fk1 is not None and fk - fk1 < 2.0 * B_f / k and fk1 <= nxt.f

    tk = _window(trace, t, cond)
    log_c = log_c_tau(B_f)
    r = _regret_at(trace, t, f_star)
    if tk is None:
        return BoundReport(t, None, None, None, None, B_f, B_c, _safe_exp(log_c), None, None, r,
                           0, False, True, label)
    sigma = trace.record_at(tk + 1).sigma_f_at_next
    sigma = sigma + JITTER_SLACK if sigma > 0 else sigma
    bracket = 4.0 * B_f / (t - 2) + (0.4 + B_f) * sigma
    log_rhs = log_c - float(log_ndtr(-B_c)) + math.log(bracket)
    rhs = _safe_exp(log_rhs)
    violated = r is not None and r > rhs + ABS_SLACK
    return BoundReport(t, tk, rhs, None, log_rhs / math.log(10), B_f, B_c, _safe_exp(log_c), None, None,
                       r, int(violated), not violated, False, label)


def bayesian_bound_rhs(trace: RegretTrace, B_c: float, M_f: float, delta: float, t: int,
                       gamma_t: float, noise_variance_for_Cgamma: float = DEFAULT_NOISE_FOR_CGAMMA,
                       f_star: float | None = None, label: str = "bayesian") -> BoundReport:
    """High-probability regret bound for a GP-sampled objective."""
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")
    if t < 4:
        raise InvalidInputError("the bound needs t >= 4")
    beta = beta_bayes(delta)
    beta_t = beta_t_bayes(t, delta)
    cg = C_gamma(noise_variance_for_Cgamma)
    info_term = math.sqrt(cg * t * gamma_t)

    def cond(tk, k, nxt):
        gap = max(trace.incumbent_at(tk) - nxt.mu_f_at_next, 0.0)
        return gap < 2.0 * M_f / k + math.sqrt(beta_t) / k * info_term

    tk = _window(trace, t, cond)
    log_c = log_c_tau(math.sqrt(beta))
    r = _regret_at(trace, t, f_star)
    if tk is None:
        return BoundReport(t, None, None, None, None, math.sqrt(beta), B_c, _safe_exp(log_c), gamma_t,
                           None, r, 0, False, True, label)
    sigma = trace.record_at(tk + 1).sigma_f_at_next
    sigma = sigma + JITTER_SLACK if sigma > 0 else sigma
    bracket = (4.0 * M_f / (t - 2) + 2.0 * math.sqrt(beta_t) / (t - 2) * info_term
               + (0.4 + math.sqrt(beta)) * sigma)
    log_rhs = log_c - float(log_ndtr(-B_c)) + math.log(bracket)
    rhs = _safe_exp(log_rhs)
    violated = r is not None and r > rhs + ABS_SLACK
    return BoundReport(t, tk, None, rhs, log_rhs / math.log(10), math.sqrt(beta), B_c, _safe_exp(log_c),
                       gamma_t, None, r, int(violated), not violated, False, label)


# -- confidence-interval checks -------------------------------------------------

def confidence_violation_rate(problem, model: gp.PosteriorModel | None, grid, B_f: float | None = None) -> float:
    """Fraction of grid points with ``|f - mu| > B_f sigma + 1e-7``.

    ``model=None`` means the prior (mu = 0, sigma = 1).
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if B_f is None:
        if problem.rkhs_norm_f is None:
            raise InvalidInputError("problem carries no RKHS norm; pass B_f")
        B_f = problem.rkhs_norm_f
    f = problem.objective(grid)
    if model is None:
        mu, sd = np.zeros_like(f), np.ones_like(f)
    else:
        mu, sd = gp.predict_many(model, grid)
    return float(np.mean(np.abs(f - mu) > B_f * sd + 1e-7))


def bayesian_interval_rate(seeds: int, delta: float, spec: KernelSpec, design, query, base_seed: int = 0):
    """Empirical violation rates of the two Gaussian-prior interval statements.

    For each seed a joint prior draw of ``f`` at ``design`` and ``query`` is
    made; the GP is conditioned on the design values.  Returns
    ``(rate_f_mu, rate_I_EI)`` for ``|f - mu| <= sqrt(beta) sigma`` with
    ``beta = 2 log(1/delta)`` and ``|I - EI| <= sqrt(beta') sigma`` with
    ``beta' = max(1.44, 2 log(c_alpha/delta))``.
    """
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")
    design = np.atleast_2d(np.asarray(design, dtype=float))
    query = np.asarray(query, dtype=float).reshape(1, -1)
    # a query on a design point shares that point's draw
    dist = np.sqrt(((design - query) ** 2).sum(1))
    same = int(np.argmin(dist)) if dist.min() <= 1e-12 else None
    pts = design if same is not None else np.vstack([design, query])
    K = kernels.gram(spec, pts)
    L = cholesky(K + 1e-10 * np.eye(K.shape[0]), lower=True, check_finite=False)
    rng = np.random.default_rng(base_seed)
    draws = rng.standard_normal((seeds, K.shape[0])) @ L.T
    n = design.shape[0]
    Y = draws[:, :n]
    fq = Y[:, same] if same is not None else draws[:, n]
    beta = 2.0 * math.log(1.0 / delta)
    beta_p = max(1.44, 2.0 * math.log(C_ALPHA / delta))
    # the posterior sd does not depend on y, so one factorization serves all seeds
    base = gp.fit(spec, gp.ObservationSet(design, Y[0]))
    _, sd = gp.predict(base, query[0])
    ks = kernels.cross(spec, query, design)[0]
    mu = ks @ cho_solve((base.chol, True), Y.T, check_finite=False)
    inc = Y.min(axis=1)
    viol_f = np.abs(fq - mu) > math.sqrt(beta) * sd
    ei = np.asarray(expected_improvement(mu, np.full_like(mu, sd), inc))
    viol_i = np.abs(improvement(fq, inc) - ei) > math.sqrt(beta_p) * sd
    return float(viol_f.mean()), float(viol_i.mean())
