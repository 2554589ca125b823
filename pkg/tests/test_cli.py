import json
import subprocess
import sys

import pytest

from ceibench.diagnostics import BoundReport
from ceibench.harness.cli import main


def write_config(tmp_path, **kw):
    cfg = {"problem": {"kind": "rkhs", "dim": 2, "seed": 0}, "n_trials": 1, "n_iterations": 5,
           "n_initial": 5, "n_search": 2048, "optimizer": {"n_candidates": 256},
           "output_dir": str(tmp_path / "run")}
    cfg.update(kw)
    p = tmp_path / "run.json"
    p.write_text(json.dumps(cfg))
    return p


def test_run_then_verify_and_plot(tmp_path, capsys):
    assert main(["run", "--config", str(write_config(tmp_path))]) == 0
    run = tmp_path / "run"
    assert (run / "summary.csv").exists()
    assert main(["verify-bounds", "--run-dir", str(run)]) == 0
    assert main(["plot", "--run-dir", str(run), "--style", "regret_loglog"]) == 0
    assert (run / "plots" / "regret_loglog.svg").exists()


def test_verify_bounds_exit_two_on_violation(tmp_path, capsys):
    rep = BoundReport(t=10, t_k=5, rhs_frequentist=1e-3, rhs_bayesian=None, log10_rhs=-3.0, B_f=1.0,
                      B_c=1.0, c_tauB=13.0, gamma_t=None, info_gain_actual=None, regret=0.5,
                      violations=1, ok=False, window_exhausted=False, label="frequentist", trial=0)
    heuristic = BoundReport(**{**rep.__dict__, "label": "heuristic-B"})
    (tmp_path / "bounds.jsonl").write_text(heuristic.to_json() + "\n")
    assert main(["verify-bounds", "--run-dir", str(tmp_path)]) == 0
    (tmp_path / "bounds.jsonl").write_text(rep.to_json() + "\n" + heuristic.to_json() + "\n")
    assert main(["verify-bounds", "--run-dir", str(tmp_path)]) == 2
    out = capsys.readouterr().out
    assert "1 with violations" in out and "trial" in out


def test_bad_config_is_rejected(tmp_path, capsys):
    p = write_config(tmp_path, surprise=1)
    assert main(["run", "--config", str(p)]) == 1
    assert "surprise" in capsys.readouterr().err


def test_unknown_subcommand_prints_usage():
    proc = subprocess.run([sys.executable, "-m", "ceibench", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode != 0 and "usage:" in proc.stderr


def test_export_grid(tmp_path, capsys):
    assert main(["export-grid", "--problem", "p1", "--resolution", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x1,x2,f,c1" and len(lines) == 10
    out = tmp_path / "g.csv"
    assert main(["export-grid", "--problem", "p4", "--resolution", "3", "--output", str(out)]) == 1


def test_bench_and_synthetic_subcommands(tmp_path):
    assert main(["bench", "--problem", "p2", "--n-trials", "1", "--n-iterations", "2",
                 "--n-candidates", "128", "--no-bounds", "--output-dir", str(tmp_path / "b")]) == 0
    cfg = json.loads((tmp_path / "b" / "config.json").read_text())
    assert cfg["problem"]["id"] == 2 and cfg["n_iterations"] == 2
    assert main(["synthetic", "--setting", "rkhs", "--kernel", "matern25", "--dim", "2", "--n-search", "1024",
                 "--n-trials", "1", "--n-iterations", "2", "--n-candidates", "128",
                 "--output-dir", str(tmp_path / "s")]) == 0
    cfg = json.loads((tmp_path / "s" / "config.json").read_text())
    assert cfg["problem"]["kernel_f"] == {"family": "matern", "nu": 2.5, "length_scale": 0.2}
