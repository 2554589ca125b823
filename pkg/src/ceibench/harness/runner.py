"""The CEI loop, trial batching, aggregation and persistence."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import acquisition, diagnostics, gp
from ..acquisition import AcquisitionContext, Incumbent
from ..errors import DegenerateSurfaceError, IllConditionedError, InvalidInputError
from ..kernels import KernelSpec, squared_exponential
from ..optimizer import Box, is_duplicate, maximize, nudge_duplicates, sobol_points
from ..problems import Problem, problem_from_meta
from ..trace import RegretTrace, TraceRecord
from .config import RunConfig

log = logging.getLogger(__name__)

SUMMARY_HEADER = ["t", "q25", "q50", "q75", "n"]
GAMMA_GRID_SIZE = 1024


def initial_design(box: Box, n: int, seed: int, mode: str = "sobol") -> np.ndarray:
    """``n`` seeded points in ``box``: scrambled Sobol, or i.i.d. uniform."""
    if n < 1:
        raise InvalidInputError("initial design needs n >= 1")
    if mode == "sobol":
        return sobol_points(box, n, seed)
    if mode == "uniform":
        return box.from_unit(np.random.default_rng(seed).random((n, box.dim)))
    raise InvalidInputError(f"unknown design mode {mode!r}")


def iteration_seed(trial_seed: int, iteration: int) -> int:
    """Optimizer seed for one loop iteration of one trial."""
    ss = np.random.SeedSequence([int(trial_seed), int(iteration)])
    return int(ss.generate_state(1, np.uint64)[0])


def model_kernels(problem: Problem, cfg: RunConfig) -> tuple[KernelSpec, list]:
    if cfg.model_kernel_f is not None:
        kf = cfg.model_kernel_f.to_spec()
    else:
        kf = problem.kernel_f or squared_exponential(0.2)
    if cfg.model_kernel_c is not None:
        kcs = [k.to_spec() for k in cfg.model_kernel_c]
        if len(kcs) == 1 and problem.n_constraints > 1:
            kcs = kcs * problem.n_constraints
        if len(kcs) != problem.n_constraints:
            raise InvalidInputError("model_kernel_c must list one kernel per constraint")
    else:
        kcs = [problem.kernel_c or squared_exponential(0.2)] * problem.n_constraints
    return kf, kcs


@dataclass
class _Fit:
    f: gp.PosteriorModel
    cs: list
    shift: float
    scale: float
    c_scales: list

    @property
    def clamp_events(self) -> int:
        return self.f.clamp_events + sum(m.clamp_events for m in self.cs)


def _fit_one(spec, X, y, hyper):
    data = gp.ObservationSet(X, y)
    if hyper.mode == "mle":
        return gp.fit_mle(spec, data, 0.0, hyper.grid)
    return gp.fit(spec, data, 0.0)


def _fit_models(Xu, F, C, kf, kcs, hyper, scaling) -> _Fit:
    shift, scale = 0.0, 1.0
    c_scales = [1.0] * C.shape[1]
    if scaling:
        shift = float(F.mean())
        scale = float(F.std()) or 1.0
        # constraints are only rescaled so that the feasibility threshold stays at 0
        c_scales = [float(C[:, i].std()) or 1.0 for i in range(C.shape[1])]
    fm = _fit_one(kf, Xu, (F - shift) / scale, hyper)
    cms = [_fit_one(k, Xu, C[:, i] / s, hyper) for i, (k, s) in enumerate(zip(kcs, c_scales))]
    return _Fit(fm, cms, shift, scale, c_scales)


def _design_posteriors(trace: RegretTrace, Xu, F, fit: _Fit) -> None:
    """Fill mu/sigma_f_at_next for initial-design records from prefix fits."""
    spec = fit.f.spec
    y = (F - fit.shift) / fit.scale
    for n, rec in enumerate(trace.records[: len(Xu)]):
        if n == 0:
            mu, sd = 0.0, 1.0
        else:
            model = gp.fit(spec, gp.ObservationSet(Xu[:n], y[:n]))
            mu, sd = gp.predict(model, Xu[n])
        rec.mu_f_at_next = mu * fit.scale + fit.shift
        rec.sigma_f_at_next = sd


def _append(trace, it, x, f, c, f_plus, **extra):
    feasible = bool(np.all(np.asarray(c) <= 0.0))
    if feasible and (f_plus is None or f < f_plus):
        f_plus = float(f)
    trace.records.append(TraceRecord(index=len(trace.records) + 1, iteration=it,
                                     x=[float(v) for v in x], f=float(f), c=[float(v) for v in c],
                                     feasible=feasible, f_plus=f_plus, **extra))
    return f_plus


def run_trial(problem: Problem, cfg: RunConfig, trial_index: int) -> RegretTrace:
    """One independent CEI run; model-fit failures end the trial, marked failed."""
    start = time.perf_counter()
    seed = cfg.base_seed + trial_index
    d = problem.dim
    n0 = cfg.n_initial or 10 * d
    unit = Box.unit(d)
    kf, kcs = model_kernels(problem, cfg)
    hyper = cfg.hyper()
    scaling = cfg.scaling()
    trace = RegretTrace(trial_index, seed, n0)

    Xu = initial_design(unit, n0, seed, cfg.initial_design)
    F, C = problem.evaluate_many(problem.box.clip(problem.box.from_unit(Xu)))
    f_plus = None
    for x, f, c in zip(problem.box.clip(problem.box.from_unit(Xu)), F, C):
        f_plus = _append(trace, 0, x, f, c, f_plus)

    try:
        fit = _fit_models(Xu, F, C, kf, kcs, hyper, scaling)
        _design_posteriors(trace, Xu, F, fit)
        for it in range(1, cfg.n_iterations + 1):
            if it > 1:
                fit = _fit_models(Xu, F, C, kf, kcs, hyper, scaling)
            inc = Incumbent.from_observations(F, C)
            ctx = AcquisitionContext(fit.f, fit.cs, inc, cfg.tolerance, fit.shift, fit.scale, fit.c_scales)
            if inc.exists:
                kind, acq = "cei", acquisition.cei
            else:
                kind, acq = "pof", acquisition.pof_only
            ocfg = cfg.optimizer.to_config(iteration_seed(seed, it))
            res = maximize(lambda U: acq(ctx, U), unit, ocfg, avoid=Xu)
            xu = res.x
            for _ in range(100):
                if not is_duplicate(xu, Xu, unit):
                    break
                xu = nudge_duplicates(xu[None, :], Xu, unit)[0]
            else:
                raise DegenerateSurfaceError("could not move the next point off the existing samples")
            mu, sd = gp.predict(fit.f, xu)
            x = problem.box.clip(problem.box.from_unit(xu))
            f_new, c_new = problem.evaluate_many(x[None, :])
            f_plus = _append(trace, it, x, f_new[0], c_new[0], f_plus, acquisition=kind,
                             acq_value=float(res.value), mu_f_at_next=mu * fit.scale + fit.shift,
                             sigma_f_at_next=sd, jitter_used=max([fit.f.jitter] + [m.jitter for m in fit.cs]),
                             clamp_events=fit.clamp_events, candidate_index=res.candidate_index,
                             length_scale_f=fit.f.spec.length_scale)
            Xu = np.vstack([Xu, xu])
            F = np.append(F, f_new)
            C = np.vstack([C, c_new])
    except (IllConditionedError, DegenerateSurfaceError) as exc:
        trace.failed = True
        trace.error = f"{type(exc).__name__}: {exc}"
        log.warning("trial %d failed: %s", trial_index, trace.error)
    trace.set_reference(problem.f_star)
    trace.wall_clock = time.perf_counter() - start
    return trace


# -- experiments --------------------------------------------------------------

@dataclass
class RunResult:
    config: RunConfig
    problem: Problem
    traces: list
    summary: list
    f_reference: float | None
    bound_reports: list = field(default_factory=list)

    @property
    def wall_clock(self) -> list:
        return [t.wall_clock for t in self.traces]


def worker_count() -> int:
    raw = os.environ.get("CEI_BENCH_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidInputError(f"CEI_BENCH_THREADS must be an integer, got {raw!r}")
    return n if n > 0 else (os.cpu_count() or 1)


def _run_trials(problem: Problem, cfg: RunConfig) -> list:
    workers = min(worker_count(), cfg.n_trials)
    if workers <= 1:
        return [run_trial(problem, cfg, i) for i in range(cfg.n_trials)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_trial, problem, cfg, i) for i in range(cfg.n_trials)]
        return [f.result() for f in futures]


def reference_optimum(problem: Problem, traces) -> float | None:
    """Regret reference: certified optimum, or for estimated optima the best of
    the estimate and every feasible value observed in any trial."""
    if problem.f_star is None or not problem.f_star_estimated:
        return problem.f_star
    seen = [r.f for t in traces for r in t.records if r.feasible]
    return min([problem.f_star] + seen)


def aggregate(traces, n_iterations: int) -> list:
    """Quantiles of regret per loop iteration over trials that have an incumbent."""
    rows = []
    for t in range(n_iterations + 1):
        vals = []
        for tr in traces:
            rec = tr.record_at(tr.n_initial + t)
            if rec is not None and rec.regret is not None:
                vals.append(rec.regret)
        if vals:
            q25, q50, q75 = (float(v) for v in np.percentile(vals, [25, 50, 75]))
        else:
            q25 = q50 = q75 = None
        rows.append({"t": t, "q25": q25, "q50": q50, "q75": q75, "n": len(vals)})
    return rows


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([r["t"]] + ["" if r[k] is None else repr(r[k]) for k in ("q25", "q50", "q75")] + [r["n"]])
    return buf.getvalue()


def read_summary(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SUMMARY_HEADER:
            raise InvalidInputError(f"unexpected summary header {reader.fieldnames}")
        for r in reader:
            rows.append({"t": int(r["t"]), "n": int(r["n"]),
                         **{k: (float(r[k]) if r[k] != "" else None) for k in ("q25", "q50", "q75")}})
    return rows


def _norm_proxy(spec: KernelSpec, X, y) -> float:
    model = gp.fit(spec, gp.ObservationSet(X, y))
    return math.sqrt(max(float(y @ model.alpha), 1e-300))


def audit_bounds(problem: Problem, cfg: RunConfig, traces, f_ref) -> list:
    """Bound reports for every auditable sample index of every trial."""
    reports = []
    kf, kcs = model_kernels(problem, cfg)
    kind = problem.meta.get("kind")
    exact_model = (cfg.hyper().mode == "fixed" and not cfg.scaling()
                   and problem.kernel_f == kf and problem.kernel_c == kcs[0])
    gammas = None
    if kind == "gp":
        T = max((len(t) for t in traces), default=0)
        grid = sobol_points(Box.unit(problem.dim), max(GAMMA_GRID_SIZE, T), 0)
        gammas, _ = diagnostics.greedy_max_info_gain(kf, grid, T, cfg.noise_variance_for_bounds)
    for tr in traces:
        if len(tr) < 4:
            continue
        if kind == "rkhs":
            B_f, B_c = problem.rkhs_norm_f, problem.rkhs_norm_c[0]
            label = "frequentist" if exact_model else "heuristic-B"
        elif kind == "benchmark":
            Xu = problem.box.to_unit(tr.X)
            C = np.array([r.c for r in tr.records])
            spec = kf.with_length_scale(tr.records[-1].length_scale_f or kf.length_scale)
            B_f = _norm_proxy(spec, Xu, tr.f_values)
            B_c = max(_norm_proxy(spec, Xu, C[:, i]) for i in range(C.shape[1]))
            label = "heuristic-B"
        for t in range(4, len(tr) + 1):
            rec = tr.record_at(t)
            if rec.f_plus is None:
                continue
            if kind == "gp":
                rep = diagnostics.bayesian_bound_rhs(
                    tr, problem.constraints[0].norm, problem.max_abs_f, cfg.delta, t,
                    float(gammas[t - 1]), cfg.noise_variance_for_bounds, f_star=f_ref,
                    label="bayesian" if exact_model else "heuristic-B")
            else:
                rep = diagnostics.frequentist_bound_rhs(tr, B_f, B_c, t, f_star=f_ref, label=label)
            rep.trial = tr.trial
            reports.append(rep)
    return reports


def _prepare_output(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def write_outputs(result: RunResult, out: Path) -> None:
    from .plots import emit_plots
    from ..errors import EmptyPlotError

    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(result.config.to_json())
    trials = out / "trials"
    if trials.exists():
        shutil.rmtree(trials)
    trials.mkdir()
    for tr in result.traces:
        (trials / f"trial_{tr.trial}.jsonl").write_text(tr.to_jsonl())
    (out / "summary.csv").write_text(summary_csv(result.summary))
    (out / "bounds.jsonl").write_text("".join(r.to_json() + "\n" for r in result.bound_reports))
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    for style in ("regret_linear", "regret_loglog"):
        try:
            (plots / f"{style}.svg").write_text(emit_plots(result.summary, style))
        except EmptyPlotError as exc:
            log.warning("skipping %s plot: %s", style, exc)
    p = result.problem
    run_meta = {
        "problem": p.name, "problem_meta": p.meta, "f_star": p.f_star,
        "f_star_reported": p.f_star_reported, "f_star_estimated": p.f_star_estimated,
        "f_reference": result.f_reference, "rkhs_norm_f": p.rkhs_norm_f, "rkhs_norm_c": p.rkhs_norm_c,
        "trials": [dict(tr.header(), wall_clock=tr.wall_clock) for tr in result.traces],
    }
    (out / "run.json").write_text(json.dumps(run_meta, indent=2, sort_keys=True, default=float) + "\n")


def run_experiment(cfg: RunConfig, problem: Problem | None = None, write: bool = True) -> RunResult:
    """Run ``cfg.n_trials`` seeded trials, aggregate, audit and persist.

    ``problem`` may be passed to skip regenerating a synthetic problem that
    the caller already built from the same configuration.
    """
    out = Path(cfg.output_dir)
    if write:
        _prepare_output(out)
    if problem is None:
        problem = problem_from_meta(cfg.problem_meta(), n_search=cfg.n_search)
    traces = _run_trials(problem, cfg)
    f_ref = reference_optimum(problem, traces)
    for tr in traces:
        tr.set_reference(f_ref)
    summary = aggregate(traces, cfg.n_iterations)
    reports = audit_bounds(problem, cfg, traces, f_ref) if cfg.check_bounds else []
    result = RunResult(cfg, problem, traces, summary, f_ref, reports)
    if write:
        write_outputs(result, out)
    return result


def load_traces(run_dir) -> list:
    run_dir = Path(run_dir)
    files = sorted((run_dir / "trials").glob("trial_*.jsonl"), key=lambda p: int(p.stem.split("_")[1]))
    return [RegretTrace.from_jsonl(p.read_text()) for p in files]


def load_bound_reports(run_dir) -> list:
    path = Path(run_dir) / "bounds.jsonl"
    return [diagnostics.BoundReport.from_json(ln) for ln in path.read_text().splitlines() if ln.strip()]
