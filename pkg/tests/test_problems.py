import csv
import io
import math

import numpy as np
import pytest

from ceibench import kernels, problems
from ceibench.errors import InvalidInputError, UnsatisfiableProblemError, UnsupportedDimensionError
from ceibench.kernels import matern, squared_exponential
from ceibench.optimizer import Box, sobol_points
from ceibench.problems import (KernelExpansion, evaluate, export_grid, make_benchmark, problem_from_meta,
                               sample_gp_function, sample_gp_problem, sample_rkhs_function,
                               sample_rkhs_problem)

SE = squared_exponential(0.2)


def test_p1_origin():
    f, c, feasible = evaluate(make_benchmark(1), [0.0, 0.0])
    assert f == 0.0 and c == [0.95] and not feasible


def test_reported_optima():
    assert [make_benchmark(i).f_star_reported for i in range(1, 6)] == [0.25, 0.6, 0.0, -3.32, 0.0]


def test_p2_origin():
    f, c, _ = evaluate(make_benchmark(2), [0.0, 0.0])
    assert f == 0.0 and c[1] == -1.5


def test_p5_rosenbrock_minimum():
    f, _, _ = evaluate(make_benchmark(5), [1.0, 1.0])
    assert f == 0.0


def test_p5_literal_constraint_flag():
    default, literal = make_benchmark(5), make_benchmark(5, p5_literal_constraint=True)
    x = [3.0, 1.0]
    assert evaluate(default, x)[1][0] == pytest.approx(math.sqrt(10) - 4)
    assert evaluate(literal, x)[1][0] == pytest.approx(math.sqrt(18) - 4)
    assert literal.meta["p5_literal_constraint"] is True


def test_p4_constraint_sums_first_four_coordinates():
    p = make_benchmark(4)
    assert evaluate(p, [1, 1, 1, 0, 0.9, 0.9])[1] == [0.0]


@pytest.mark.parametrize("pid", range(1, 6))
def test_corners_evaluate(pid):
    p = make_benchmark(pid)
    corners = np.array(np.meshgrid(*zip(p.box.lower, p.box.upper))).reshape(p.dim, -1).T
    f, C = p.evaluate_many(corners)
    assert np.all(np.isfinite(f)) and np.all(np.isfinite(C))


def test_out_of_box_and_unknown_id():
    with pytest.raises(InvalidInputError):
        evaluate(make_benchmark(1), [6.5, 0.0])
    with pytest.raises(InvalidInputError):
        make_benchmark(6)


@pytest.mark.parametrize("pid", range(1, 6))
def test_optimum_certificates(pid):
    p = make_benchmark(pid)
    f, c, feasible = evaluate(p, p.x_star)
    assert max(c) <= 1e-9 and feasible
    assert abs(f - p.f_star) <= 1e-6
    # no feasible point of a dense seeded search beats the certified value
    X = sobol_points(p.box, 2**16, pid)
    fs, C = p.evaluate_many(X)
    ok = np.all(C <= 0, axis=1)
    assert fs[ok].min() >= p.f_star - 1e-9


def test_kernel_expansion_single_term():
    basis = np.random.default_rng(0).random((5, 2))
    w = np.zeros(5)
    w[2] = 1.0
    g = KernelExpansion(SE, basis, w)
    Q = np.random.default_rng(1).random((10, 2))
    np.testing.assert_allclose(g(Q), [kernels.eval(SE, q, basis[2]) for q in Q], rtol=1e-14)


def test_norm_with_orthonormal_basis():
    basis = np.arange(6.0)[:, None] * 100.0  # far apart: K is the identity
    w = np.array([1.0, -2.0, 0.5, 3.0, 0.0, 1.5])
    assert KernelExpansion(SE, basis, w).norm == pytest.approx(np.linalg.norm(w), rel=1e-15)


@pytest.mark.parametrize("spec", [SE, matern(2.5, 0.2)])
def test_rkhs_boundedness(spec):
    side = np.linspace(0, 1, 100)
    grid = np.stack(np.meshgrid(side, side), -1).reshape(-1, 2)
    for seed in range(20):
        g = sample_rkhs_function(spec, Box.unit(2), problems._generator(seed, 0))
        assert g.norm > 0
        assert np.abs(g(grid)).max() <= g.norm


def test_gp_anchor_values_and_reproducibility():
    fn, values, jitter = sample_gp_function(SE, Box.unit(2), problems._generator(3, 0))
    assert jitter == 1e-10
    np.testing.assert_allclose(fn(fn.basis), values, atol=1e-6)
    _, again, _ = sample_gp_function(SE, Box.unit(2), problems._generator(3, 0))
    assert np.array_equal(values, again)


def test_gp_anchor_prior_variance():
    draws = [sample_gp_function(SE, Box.unit(2), problems._generator(s, 0))[1][0] for s in range(200)]
    assert abs(np.var(draws) - 1.0) <= 0.2


def test_rkhs_problem_metadata_and_determinism():
    a = sample_rkhs_problem(SE, SE, 2, 7, n_search=4096)
    b = sample_rkhs_problem(SE, SE, 2, 7, n_search=4096)
    assert a.f_star_estimated and a.rkhs_norm_f > 0 and len(a.rkhs_norm_c) == 1
    assert a.f_star == b.f_star and np.array_equal(a.x_star, b.x_star)
    assert np.array_equal(a.objective.weights, b.objective.weights)
    f, c, feasible = evaluate(a, a.x_star)
    assert feasible and f == pytest.approx(a.f_star, abs=1e-12)
    assert a.meta == {"kind": "rkhs", "seed": 7, "dim": 2, "kernel_f": SE.to_dict(),
                      "kernel_c": SE.to_dict(), "resample": 0}


def test_gp_problem_carries_max_abs_f():
    p = sample_gp_problem(SE, SE, 2, 1, n_search=4096)
    assert p.rkhs_norm_f is None and p.max_abs_f > 0
    assert p.meta["anchor_jitter_f"] == 1e-10


def test_unsatisfiable_after_retries(monkeypatch):
    calls = []
    monkeypatch.setattr(problems, "estimate_optimum", lambda *a, **k: calls.append(1))
    with pytest.raises(UnsatisfiableProblemError):
        sample_rkhs_problem(SE, SE, 2, 0, n_search=16)
    assert len(calls) == problems.MAX_RESAMPLES + 1


def test_problem_from_meta_round_trip():
    p = sample_rkhs_problem(SE, SE, 2, 4, n_search=1024)
    q = problem_from_meta(p.meta, n_search=1024)
    assert q.f_star == p.f_star and q.name == p.name
    assert problem_from_meta({"kind": "benchmark", "id": 3}).name == "p3"
    with pytest.raises(InvalidInputError):
        problem_from_meta({"kind": "tabular"})


def test_export_grid_corners():
    text = export_grid(make_benchmark(2), 2)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["x1", "x2", "f", "c1", "c2"]
    assert [(float(r[0]), float(r[1])) for r in rows[1:]] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_export_grid_p1_has_both_regions():
    rows = list(csv.DictReader(io.StringIO(export_grid(make_benchmark(1), 50))))
    c = [float(r["c1"]) for r in rows]
    assert max(c) > 0 and min(c) <= 0


def test_export_grid_rejects_non_2d():
    with pytest.raises(UnsupportedDimensionError):
        export_grid(make_benchmark(4), 5)
    with pytest.raises(InvalidInputError):
        export_grid(make_benchmark(1), 1)
