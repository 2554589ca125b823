import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import besselk, gamma, mp, mpf, sqrt as mpsqrt

from ceibench import kernels
from ceibench.errors import InvalidInputError
from ceibench.kernels import KernelSpec, matern, squared_exponential

SPECS = [squared_exponential(0.2), squared_exponential(1.0), matern(0.5, 0.3), matern(1.5, 0.3), matern(2.5, 0.2)]


def bessel_matern(nu, l, r):
    """Matern kernel from its Bessel-function definition, high precision."""
    mp.dps = 40
    if r == 0:
        return 1.0
    s = mpsqrt(2 * mpf(nu)) * mpf(r) / mpf(l)
    return float(2 ** (1 - mpf(nu)) / gamma(mpf(nu)) * s ** mpf(nu) * besselk(mpf(nu), s))


def test_se_identical_points():
    assert kernels.eval(squared_exponential(0.2), [0.3, 0.4], [0.3, 0.4]) == 1.0


def test_se_unit_distance():
    v = kernels.eval(squared_exponential(1.0), [0.0], [1.0])
    assert v == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert v == pytest.approx(0.60653065971263342, abs=1e-15)


def test_matern_half_unit_distance():
    v = kernels.eval(matern(0.5, 1.0), [0.0, 0.0], [1.0, 0.0])
    assert v == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert v == pytest.approx(bessel_matern(0.5, 1.0, 1.0), rel=1e-12)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
@pytest.mark.parametrize("r", [0.01, 0.1, 0.37, 1.0, 2.5])
def test_matern_closed_forms_match_bessel(nu, r):
    v = kernels.eval(matern(nu, 0.4), [0.0], [r])
    assert v == pytest.approx(bessel_matern(nu, 0.4, r), rel=1e-11)


def test_gram_examples():
    assert np.array_equal(kernels.gram(squared_exponential(0.2), [[0.5, 0.5]]), [[1.0]])
    assert np.array_equal(kernels.gram(squared_exponential(0.2), [[0.1], [0.1]]), np.ones((2, 2)))
    K = kernels.gram(squared_exponential(1.0), [[0.0], [1.0]])
    e = math.exp(-0.5)
    np.testing.assert_allclose(K, [[1, e], [e, 1]], rtol=1e-15)


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        KernelSpec("se", 0.0)
    with pytest.raises(InvalidInputError):
        KernelSpec("matern", 0.2, 1.0)
    with pytest.raises(InvalidInputError):
        KernelSpec("rbf", 0.2)


def test_eval_errors():
    with pytest.raises(InvalidInputError):
        kernels.eval(squared_exponential(), [0.0, 1.0], [0.0])
    with pytest.raises(InvalidInputError):
        kernels.eval(squared_exponential(), [np.nan], [0.0])
    with pytest.raises(InvalidInputError):
        kernels.gram(squared_exponential(), [[0.0], [np.inf]])


def test_serialization_round_trip():
    for spec in SPECS:
        d = spec.to_dict()
        assert KernelSpec.from_dict(d) == spec
        assert ("nu" in d) == (spec.family == "matern")
    assert matern(2.5).to_dict() == {"family": "matern", "nu": 2.5, "length_scale": 0.2}
    with pytest.raises(InvalidInputError):
        KernelSpec.from_dict({"family": "se", "length_scale": 0.2, "variance": 2.0})


points = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=100, deadline=None)
@given(points, points, st.sampled_from(SPECS))
def test_symmetry_and_range(x, y, spec):
    a, b = kernels.eval(spec, x, y), kernels.eval(spec, y, x)
    assert a == b
    assert 0.0 <= a <= 1.0
    assert abs(kernels.eval(spec, x, x) - 1.0) <= 1e-15


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 5, allow_nan=False), min_size=2, max_size=20), st.sampled_from(SPECS))
def test_monotone_decay(rs, spec):
    rs = np.sort(rs)
    vals = [kernels.eval(spec, [0.0, 0.0], [r, 0.0]) for r in rs]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("spec", SPECS)
@pytest.mark.parametrize("seed", range(5))
def test_gram_psd(spec, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((50, 3))
    K = kernels.gram(spec, X)
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 1.0)
    assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_matern_approaches_se_at_small_r():
    l = 0.3
    a = kernels.eval(matern(2.5, l), [0.0], [0.01 * l])
    b = kernels.eval(squared_exponential(l), [0.0], [0.01 * l])
    assert abs(a - b) < 1e-4


def test_cross_matches_pointwise():
    rng = np.random.default_rng(1)
    A, B = rng.random((7, 2)), rng.random((300, 2))
    for spec in SPECS:
        K = kernels.cross(spec, A, B)
        ref = np.array([[kernels.eval(spec, a, b) for b in B] for a in A])
        np.testing.assert_allclose(K, ref, rtol=1e-12, atol=1e-14)
