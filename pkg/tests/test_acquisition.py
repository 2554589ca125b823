import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ceibench import gp
from ceibench.acquisition import (AcquisitionContext, Incumbent, cei, expected_improvement,
                                  expected_improvement_at, improvement, norm_cdf, norm_pdf,
                                  pof_only, probability_of_feasibility, tau)
from ceibench.errors import InvalidInputError, NoIncumbentError
from ceibench.kernels import squared_exponential

from oracles import ei_reference, mc_expected_improvement

PHI0 = 0.3989422804014327


def test_tau_values():
    assert tau(0.0) == pytest.approx(PHI0, rel=1e-15)
    # high-precision value of 3 Phi(3) + phi(3)
    assert tau(3.0) == pytest.approx(3.0003821543170477, rel=1e-14)
    assert tau(1.0) > tau(0.0) > tau(-1.0) > 0


@settings(max_examples=200, deadline=None)
@given(st.floats(-30, 30), st.floats(1e-6, 5))
def test_tau_positive_and_increasing(z, dz):
    assert tau(z) > 0
    assert tau(z + dz) > tau(z)


def test_improvement_examples():
    assert improvement(0.2, 0.5) == pytest.approx(0.3)
    assert improvement(0.5, 0.5) == 0.0
    assert improvement(1.0, 0.5) == 0.0


def test_ei_examples():
    assert expected_improvement(0.7, 1.0, 0.7) == pytest.approx(PHI0, rel=1e-15)
    assert expected_improvement(0.2, 0.0, 0.5) == pytest.approx(0.3)
    assert expected_improvement(0.8, 0.0, 0.5) == 0.0
    with pytest.raises(InvalidInputError):
        expected_improvement(0.0, -1e-3, 0.0)


def test_ei_monte_carlo_spot_check():
    rng = np.random.default_rng(0)
    mean, se = mc_expected_improvement(0.3, 0.8, 0.1, 200_000, rng)
    assert abs(expected_improvement(0.3, 0.8, 0.1) - mean) <= 4 * se


@settings(max_examples=300, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-3, 5), st.floats(-5, 5))
def test_ei_tau_identity_and_reference(mu, sigma, inc):
    ei = expected_improvement(mu, sigma, inc)
    z = (inc - mu) / sigma
    assert ei == pytest.approx(sigma * tau(z), rel=1e-12, abs=1e-300)
    assert ei == pytest.approx(ei_reference(mu, sigma, inc), rel=1e-10, abs=1e-15)
    assert ei >= 0 and ei >= inc - mu - 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-4, 8), st.booleans(), st.floats(1e-2, 3))
def test_ei_envelope(a, negative, sigma):
    # both inequalities are strict away from z = 0, where EI / sigma = phi(0)
    z = -a if negative else a
    r = expected_improvement(0.0, sigma, z * sigma) / sigma
    if z < 0:
        assert z <= r < float(norm_pdf(z))
    else:
        assert r < z + float(norm_pdf(z))


def test_pof_examples():
    assert probability_of_feasibility(0.0, 1.0, 0.0) == 0.5
    assert probability_of_feasibility(-0.1, 0.0, 0.0) == 1.0
    assert probability_of_feasibility(0.1, 0.0, 0.0) == 0.0
    assert probability_of_feasibility(0.0, 0.0, 0.0) == 1.0
    assert probability_of_feasibility(1.0, 1.0, 1.0) == 0.5
    with pytest.raises(InvalidInputError):
        probability_of_feasibility(0.0, -1.0)


def test_cdf_tails_and_clamp():
    assert float(norm_cdf(-2.0)) == pytest.approx(0.022750131948179195, rel=1e-14)
    assert float(norm_cdf(-7.5)) == pytest.approx(3.190891672910919e-14, rel=1e-10)
    assert float(norm_cdf(8.5)) == 1.0 and float(norm_cdf(-8.5)) == 0.0


def _model(X, y, l=0.3):
    return gp.fit(squared_exponential(l), gp.ObservationSet(np.asarray(X, float), np.asarray(y, float)))


def test_incumbent_from_observations():
    inc = Incumbent.from_observations([3.0, 1.0, 2.0], [[0.1], [0.5], [0.0]])
    assert inc.exists and inc.value == 2.0
    assert not Incumbent.from_observations([1.0], [[0.1]]).exists


def test_cei_equals_ei_when_constraint_certain():
    X = np.array([[0.1], [0.5], [0.9]])
    fm = _model(X, [0.3, -0.2, 0.4])
    # a far-reaching constraint model with a clearly negative mean: POF clamps to 1
    cm = _model(X, [-1.0, -1.0, -1.0], l=10.0)
    ctx = AcquisitionContext(fm, [cm], Incumbent(-0.2, True))
    Q = np.linspace(0, 1, 101)[:, None]
    np.testing.assert_array_equal(cei(ctx, Q), expected_improvement_at(ctx, Q))


def test_cei_zero_at_noise_free_incumbent():
    X = np.array([[0.2], [0.7]])
    fm = _model(X, [0.0, 1.0])
    cm = _model(X, [0.5, -0.5])
    ctx = AcquisitionContext(fm, [cm], Incumbent(0.0, True))
    ctx_exact = AcquisitionContext(fm, [cm], Incumbent(gp.predict(fm, [0.2])[0], True))
    assert cei(ctx_exact, np.array([0.2])) <= 1e-6


def test_cei_product_of_two_half_pofs():
    X = np.array([[0.5]])
    fm = _model(X, [0.0])
    cm = _model(X, [0.0])
    far = np.array([[40.0]])
    inc = 0.0
    ctx = AcquisitionContext(fm, [cm, cm], Incumbent(inc, True))
    ei = expected_improvement_at(ctx, far)[0]
    assert pof_only(ctx, far)[0] == 0.25
    assert cei(ctx, far)[0] == pytest.approx(0.25 * ei, rel=1e-15)
    assert ei == pytest.approx(PHI0, rel=1e-12)


def test_cei_factorization_is_bitwise():
    rng = np.random.default_rng(4)
    X = rng.random((6, 2))
    fm = _model(X, rng.standard_normal(6))
    cms = [_model(X, rng.standard_normal(6)) for _ in range(3)]
    ctx = AcquisitionContext(fm, cms, Incumbent(0.1, True), tolerance=0.05)
    Q = rng.random((200, 2))
    np.testing.assert_array_equal(cei(ctx, Q), expected_improvement_at(ctx, Q) * pof_only(ctx, Q))


def test_pof_only_examples_and_missing_incumbent():
    X = np.array([[0.5]])
    cm = _model(X, [0.0])
    ctx = AcquisitionContext(_model(X, [0.0]), [cm, cm, cm], Incumbent())
    far = np.array([40.0])
    assert pof_only(ctx, far) == 0.125
    with pytest.raises(NoIncumbentError):
        cei(ctx, far)
    sure = AcquisitionContext(_model(X, [0.0]), [_model(X, [-5.0], l=50.0)], Incumbent())
    assert pof_only(sure, np.array([0.4])) == 1.0


def test_tolerance_relaxes_feasibility_and_zero_recovers_standard():
    X = np.array([[0.2], [0.8]])
    fm, cm = _model(X, [0.0, 1.0]), _model(X, [0.3, -0.3])
    Q = np.linspace(0, 1, 11)[:, None]
    base = AcquisitionContext(fm, [cm], Incumbent(0.0, True))
    loose = AcquisitionContext(fm, [cm], Incumbent(0.0, True), tolerance=0.2)
    assert np.all(pof_only(loose, Q) >= pof_only(base, Q))
    mu, sd = gp.predict(cm, Q)
    np.testing.assert_array_equal(pof_only(base, Q), probability_of_feasibility(mu, sd, 0.0))


def test_scaled_context_matches_raw_units():
    X = np.array([[0.1], [0.4], [0.9]])
    f = np.array([5.0, 3.0, 4.0])
    shift, scale = 4.0, 2.0
    fm_scaled = _model(X, (f - shift) / scale)
    cm = _model(X, [-1.0, 0.5, -0.2])
    Q = np.linspace(0, 1, 21)[:, None]
    scaled = AcquisitionContext(fm_scaled, [cm], Incumbent(3.5, True), objective_shift=shift, objective_scale=scale)
    # EI is positively homogeneous in (mu, sigma, incumbent)
    mu_s, sd_s = gp.predict(fm_scaled, Q)
    np.testing.assert_allclose(expected_improvement_at(scaled, Q) * scale,
                               expected_improvement(mu_s * scale + shift, sd_s * scale, 3.5), rtol=1e-12)
