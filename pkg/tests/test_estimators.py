import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from zogradient.estimators import (
    FdmConfig,
    FiniteDifferenceEstimator,
    PackingDecoder,
    boundary_step,
    decode_alpha,
    fdm_estimate,
    optimal_step_chebyshev,
    optimal_step_gaussian,
    resolve_step,
)
from zogradient.funcspace import CubicFunction, DomainBox, HyperplaneFunction
from zogradient.oracles import AdversarialBernoulliOracle, GaussianOracle, make_rng
from zogradient.packing import PackingSet, build_packing, min_discrepancy_psi


def test_noiseless_linear_is_exact():
    c = np.array([1.0, -2.0, 0.5])
    f = CubicFunction.linear(c)
    oracle = GaussianOracle(0.0, 60, rng=make_rng(0))
    est = fdm_estimate(oracle, f, np.zeros(3), FdmConfig(60, "fixed", 0.3))
    np.testing.assert_allclose(est.grad_hat, c, rtol=1e-12)


def test_noiseless_cubic_bias():
    # bias h^2 k / 6 = 1 per coordinate
    c = np.array([1.0, -2.0])
    f = CubicFunction(6.0, [0.0, 0.0], c)
    oracle = GaussianOracle(0.0, 8, rng=make_rng(0))
    est = fdm_estimate(oracle, f, np.zeros(2), FdmConfig(8, "fixed", 1.0))
    np.testing.assert_allclose(est.grad_hat, c + 1, rtol=1e-12)


def test_query_accounting():
    f = CubicFunction.zeros(3)
    oracle = GaussianOracle(1.0, 20, rng=make_rng(1))
    est = fdm_estimate(oracle, f, np.zeros(3), FdmConfig(20, "fixed", 0.1))
    assert est.queries_used == 18 == oracle.used
    assert est.step_used == 0.1


def test_transcript_is_dimension_major():
    oracle = AdversarialBernoulliOracle([1, -1], 0.25, 1.0, 12, DomainBox.centered(2, 2.0), rng=make_rng(2))
    fdm_estimate(oracle, None, np.zeros(2), FdmConfig(12, "boundary"))
    xs = np.array([r[1] for r in oracle.transcript.rows()])
    expected = [[2, 0]] * 3 + [[-2, 0]] * 3 + [[0, 2]] * 3 + [[0, -2]] * 3
    np.testing.assert_array_equal(xs, expected)


def test_budget_validation():
    f = CubicFunction.zeros(4)
    with pytest.raises(ValueError):
        fdm_estimate(GaussianOracle(1.0, 7, rng=make_rng(0)), f, np.zeros(4), FdmConfig(7, "fixed", 0.1))
    with pytest.raises(ValueError):
        fdm_estimate(GaussianOracle(1.0, 10, rng=make_rng(0)), f, np.zeros(4), FdmConfig(20, "fixed", 0.1))


def test_step_leaving_domain_rejected():
    f = CubicFunction.zeros(2)
    oracle = GaussianOracle(1.0, 10, rng=make_rng(0), domain=DomainBox.centered(2, 1.0))
    with pytest.raises(ValueError):
        fdm_estimate(oracle, f, np.zeros(2), FdmConfig(10, "fixed", 1.5))


def test_chebyshev_step_example():
    # d = 1, T = 36, sigma = 1, k = 6 -> cbrt(1/6), mpmath
    assert optimal_step_chebyshev(1, 36, 1.0, 6.0) == pytest.approx(0.5503212081491044, rel=1e-14)


def test_gaussian_step_example():
    # (18/pi)^(1/6) / 64^(1/6), mpmath
    assert optimal_step_gaussian(1, 64, 1.0, 1.0) == pytest.approx(1.3376847378509254 / 2, rel=1e-14)


def test_step_scaling():
    base = optimal_step_gaussian(4, 128, 1.0, 6.0)
    assert optimal_step_gaussian(4, 1024, 1.0, 6.0) / base == pytest.approx(8 ** (-1 / 6), rel=1e-14)
    assert optimal_step_gaussian(4, 128, 2.0, 6.0) / base == pytest.approx(2 ** (1 / 3), rel=1e-14)
    cheb = optimal_step_chebyshev(4, 128, 1.0, 6.0)
    assert optimal_step_chebyshev(4, 512, 1.0, 6.0) / cheb == pytest.approx(4 ** (-1 / 6), rel=1e-14)


@pytest.mark.parametrize("d, T, sigma, k", [(1, 10, 1.0, 1.0), (4, 160, 0.5, 6.0), (64, 10**6, 3.0, 0.01)])
def test_gaussian_step_exponent_identity(d, T, sigma, k):
    h = optimal_step_gaussian(d, T, sigma, k)
    assert k**2 * h**6 * T / (72 * sigma**2 * d) == pytest.approx(1 / (4 * math.pi), rel=1e-12)


def test_optimal_steps_need_curvature():
    with pytest.raises(ValueError):
        optimal_step_gaussian(2, 10, 1.0, 0.0)
    with pytest.raises(ValueError):
        optimal_step_chebyshev(2, 10, 1.0, 0.0)
    with pytest.raises(ValueError):
        optimal_step_gaussian(4, 7, 1.0, 1.0)


def test_boundary_step_examples():
    box = DomainBox.centered(2, 1.0)
    assert boundary_step([0.0, 0.0], box) == 1.0
    assert boundary_step([0.5, -0.2], box) == 0.5
    with pytest.raises(ValueError):
        boundary_step([1.0, 0.0], box)
    with pytest.raises(ValueError):
        boundary_step([0.0], box)


def test_config_parse():
    assert FdmConfig.parse("fixed:0.25", 10) == FdmConfig(10, "fixed", 0.25)
    assert FdmConfig.parse("gaussian", 10).policy == "gaussian"
    assert str(FdmConfig.parse("fixed:0.25", 10)) == "fixed:0.25"
    for bad in ("fixed", "fixed:x", "boundary:1", "newton"):
        with pytest.raises(ValueError):
            FdmConfig.parse(bad, 10)
    assert FdmConfig(100, "boundary").pairs_per_dim(3) == 16


def test_resolve_step_dispatch():
    box = DomainBox.centered(2, 0.7)
    assert resolve_step(FdmConfig(20, "boundary"), 2, 1.0, 0.0, domain=box) == 0.7
    assert resolve_step(FdmConfig(20, "gaussian"), 2, 1.0, 6.0) == optimal_step_gaussian(2, 20, 1.0, 6.0)
    with pytest.raises(ValueError):
        resolve_step(FdmConfig(20, "boundary"), 2, 1.0, 0.0)


def two_point_packing():
    return PackingSet(4, [[1, 1, 1, 1], [-1, -1, -1, -1]])


def test_decode_exact_member():
    p = build_packing(16, seed=0)
    delta = 0.1
    for a in p.vectors:
        g = HyperplaneFunction(a, delta).grad(np.zeros(16))
        np.testing.assert_array_equal(decode_alpha(g, p, delta, rng=0), a)


def test_decode_radius_is_inclusive():
    p = two_point_packing()
    delta = 0.25
    psi = min_discrepancy_psi(p, delta)
    assert psi == 0.5
    center = np.full(4, delta / 4)
    on_edge = center.copy()
    on_edge[0] += psi / 3
    for seed in range(20):
        np.testing.assert_array_equal(decode_alpha(on_edge, p, delta, rng=seed), [1, 1, 1, 1])
    # just outside: both members appear across seeds
    outside = center.copy()
    outside[0] += psi / 3 * (1 + 1e-6)
    seen = {tuple(decode_alpha(outside, p, delta, rng=s)) for s in range(40)}
    assert len(seen) == 2


def test_decode_fallback_is_uniform():
    p = build_packing(16, seed=1)
    m = len(p)
    dec = PackingDecoder(delta=0.25, random_state=123).fit(p)
    # the origin is delta away from every center, beyond psi/3
    n = 10**4
    idx = dec.predict_index(np.zeros((n, 16)))
    counts = np.bincount(idx, minlength=m)
    sd = math.sqrt(n * (1 / m) * (1 - 1 / m))
    assert np.all(np.abs(counts - n / m) <= 5 * sd)


@settings(max_examples=60, deadline=None)
@given(
    d=st.integers(4, 24),
    seed=st.integers(0, 10**6),
    delta=st.floats(1e-3, 0.25),
    scale=st.floats(0.0, 2.0),
)
def test_at_most_one_member_within_radius(d, seed, delta, scale):
    p = build_packing(d, seed)
    dec = PackingDecoder(delta=delta).fit(p)
    rng = np.random.default_rng(seed)
    base = dec.centers_[rng.integers(len(p))]
    X = base + scale * dec.radius_ * rng.uniform(-1, 1, size=(50, d)) * 3 / d
    assert np.all(dec.count_within(X) <= 1)


def test_decoder_predict_and_validation():
    p = two_point_packing()
    dec = PackingDecoder(delta=0.25, random_state=0).fit(p)
    assert dec.radius_ == pytest.approx(dec.psi_ / 3)
    np.testing.assert_array_equal(dec.predict(dec.centers_), p.vectors)
    with pytest.raises(ValueError):
        dec.predict_index(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        PackingDecoder(delta=0.0).fit(p)


def test_estimator_sklearn_protocol():
    est = FiniteDifferenceEstimator(budget=40, policy="fixed", h=0.5)
    assert est.get_params() == {"budget": 40, "policy": "fixed", "h": 0.5, "k": None}
    est.set_params(budget=80)
    twin = clone(est)
    assert twin.get_params()["budget"] == 80 and not hasattr(twin, "grad_")
    assert PackingDecoder(delta=0.1, random_state=3).get_params() == {"delta": 0.1, "random_state": 3}


def test_estimator_fit_predict_score():
    f = CubicFunction.linear([1.0, 2.0])
    est = FiniteDifferenceEstimator(budget=40, policy="boundary")
    oracle = GaussianOracle(0.0, 40, rng=make_rng(0), domain=DomainBox.centered(2, 1.0))
    est.fit(oracle, f)
    assert est.n_queries_ == 40 and est.step_ == 1.0 and est.n_features_in_ == 2
    np.testing.assert_allclose(est.predict(), [1.0, 2.0])
    assert est.predict(np.zeros((3, 2))).shape == (3, 2)
    assert est.score([1.0, 2.0]) == pytest.approx(0.0, abs=1e-12)


def test_estimator_uses_function_curvature():
    f = CubicFunction(6.0, [0.0, 0.0], [0.0, 0.0])
    est = FiniteDifferenceEstimator(budget=64, policy="gaussian")
    est.fit(GaussianOracle(1.0, 64, rng=make_rng(0)), f, x_star=np.zeros(2))
    assert est.step_ == optimal_step_gaussian(2, 64, 1.0, 6.0)


def test_estimator_predict_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        FiniteDifferenceEstimator().predict()
