"""``cei-bench`` command line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from ..errors import CeiBenchError, EmptyPlotError
from ..problems import export_grid, make_benchmark
from .config import RunConfig, load_config
from .plots import STYLES, emit_plots
from .runner import load_bound_reports, read_summary, run_experiment

log = logging.getLogger("ceibench")

KERNELS = {"se": {"family": "se", "length_scale": 0.2},
           "matern25": {"family": "matern", "nu": 2.5, "length_scale": 0.2}}


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-trials", type=int)
    p.add_argument("--n-iterations", type=int)
    p.add_argument("--n-initial", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--initial-design", choices=["sobol", "uniform"])
    p.add_argument("--n-candidates", type=int)
    p.add_argument("--no-bounds", action="store_true", help="skip the bound audit")
    p.add_argument("--output-dir", help="defaults to cei-<problem>")


def _overrides(args) -> dict:
    out = {}
    for key in ("n_trials", "n_iterations", "n_initial", "base_seed", "tolerance",
                "initial_design", "output_dir"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if getattr(args, "n_candidates", None) is not None:
        out["optimizer"] = {"n_candidates": args.n_candidates}
    if getattr(args, "no_bounds", False):
        out["check_bounds"] = False
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cei-bench",
                                     description="Constrained expected improvement benchmarks and bound audits.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--output-dir")

    p = sub.add_parser("bench", help="run one of the five benchmark problems")
    p.add_argument("--problem", required=True, choices=[f"p{i}" for i in range(1, 6)])
    p.add_argument("--p5-literal-constraint", action="store_true")
    _add_overrides(p)

    p = sub.add_parser("synthetic", help="run a synthetic RKHS or GP-prior setting")
    p.add_argument("--setting", required=True, choices=["rkhs", "gp"])
    p.add_argument("--kernel", required=True, choices=sorted(KERNELS))
    p.add_argument("--dim", required=True, type=int, choices=[2, 4])
    p.add_argument("--seed", type=int, default=0, help="problem generator seed")
    p.add_argument("--n-search", type=int, help="optimum search size (default 2^20)")
    _add_overrides(p)

    p = sub.add_parser("verify-bounds", help="check bounds.jsonl of a finished run")
    p.add_argument("--run-dir", required=True, type=Path)

    p = sub.add_parser("plot", help="render regret plots from summary.csv")
    p.add_argument("--run-dir", required=True, type=Path)
    p.add_argument("--style", choices=STYLES, default="regret_linear")

    p = sub.add_parser("export-grid", help="write a 2-d problem on a grid as CSV")
    p.add_argument("--problem", required=True, choices=[f"p{i}" for i in range(1, 6)])
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--output", type=Path, help="file to write (default stdout)")
    return parser


def _execute(cfg: RunConfig) -> int:
    result = run_experiment(cfg)
    failed = sum(t.failed for t in result.traces)
    last = result.summary[-1]
    print(f"{result.problem.name}: {len(result.traces)} trials, {failed} failed, "
          f"median regret at t={last['t']}: {last['q50']}")
    print(f"artifacts written to {cfg.output_dir}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg = cfg.model_copy(update={"output_dir": args.output_dir})
    return _execute(cfg)


def cmd_bench(args) -> int:
    data = {"problem": {"kind": "benchmark", "id": int(args.problem[1:]),
                        "p5_literal_constraint": args.p5_literal_constraint},
            "output_dir": f"cei-{args.problem}"}
    data.update(_overrides(args))
    return _execute(RunConfig.model_validate(data))


def cmd_synthetic(args) -> int:
    k = KERNELS[args.kernel]
    data = {"problem": {"kind": args.setting, "seed": args.seed, "dim": args.dim, "kernel_f": k, "kernel_c": k},
            "output_dir": f"cei-{args.setting}-{args.kernel}-d{args.dim}"}
    if args.n_search:
        data["n_search"] = args.n_search
    data.update(_overrides(args))
    return _execute(RunConfig.model_validate(data))


def cmd_verify(args) -> int:
    reports = load_bound_reports(args.run_dir)
    hard = [r for r in reports if r.label == "frequentist"]
    bad = [r for r in hard if r.violations > 0]
    exhausted = sum(r.window_exhausted for r in reports)
    print(f"{len(reports)} reports, {len(hard)} hard (frequentist), {len(bad)} with violations, "
          f"{exhausted} with an exhausted t_k window")
    if bad:
        print(f"{'trial':>5} {'t':>4} {'t_k':>4} {'regret':>12} {'log10 rhs':>10}")
        for r in bad:
            print(f"{r.trial!s:>5} {r.t:>4} {r.t_k!s:>4} {r.regret!s:>12} {r.log10_rhs!s:>10.10}")
        return 2
    return 0


def cmd_plot(args) -> int:
    rows = read_summary(args.run_dir / "summary.csv")
    svg = emit_plots(rows, args.style)
    out = args.run_dir / "plots" / f"{args.style}.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(out)
    return 0


def cmd_export(args) -> int:
    text = export_grid(make_benchmark(int(args.problem[1:])), args.resolution)
    if args.output:
        args.output.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "synthetic": cmd_synthetic,
            "verify-bounds": cmd_verify, "plot": cmd_plot, "export-grid": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except EmptyPlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CeiBenchError, ValidationError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
