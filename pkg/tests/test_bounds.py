import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bundled_manifolds
from finsler_means import (
    CurvatureBounds,
    EuclideanNorm,
    FlatManifold,
    InvalidInputError,
    MeanProblemBounds,
    OutOfComparisonRangeError,
    RandersNorm,
    SingularMajorantError,
    WeightedSampleMeasure,
    existence_ball,
    hessian_lower_bound,
    hessian_upper_bound,
    median_convexity_margin,
    step_constant_CH,
    step_majorant,
    step_majorant_measure,
    support_condition,
    uniqueness_radius,
)
from finsler_means.bounds import ball_grid, injectivity_conditions

E2 = bundled_manifolds()["flat-euclidean"]
R1 = FlatManifold(RandersNorm(np.eye(1), [0.5]))


def test_uniqueness_radius_examples():
    for k in (0.25, 1.0, 4.0):
        for p in (2, 3, 7.5):
            assert uniqueness_radius(p, k, 0.0, 1.0) == pytest.approx(np.pi / (2 * np.sqrt(k)), abs=1e-12)
    assert uniqueness_radius(1.5, 1.0, 1.0, 1.0) == pytest.approx(0.5)
    assert uniqueness_radius(2, 1.0, 1.0, 1.0) == pytest.approx(np.arctan(1.0))
    assert uniqueness_radius(2, 0.0, 0.0, 1.0) == np.inf
    assert uniqueness_radius(2, 0.0, 0.5, 2.0) == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        uniqueness_radius(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        uniqueness_radius(2, 0.0, 1.0, 1.0, limits=False)


def test_uniqueness_radius_delta_limit():
    k = 2.0
    assert uniqueness_radius(2, k, 1e-14, 1.0) == pytest.approx(np.pi / (2 * np.sqrt(k)), abs=1e-9)


def test_hessian_lower_bound_examples():
    assert hessian_lower_bound(2, 1.0, 0.0, 0.0, 1.0) == pytest.approx(2.0)
    expected = 2 * (min(1.0, 0.5 / np.tan(0.5)) - 0.05)
    assert hessian_lower_bound(2, 0.5, 1.0, 0.1, 1.0) == pytest.approx(expected)
    with pytest.raises(OutOfComparisonRangeError):
        hessian_lower_bound(2, 3.2, 1.0, 0.0, 1.0)


def test_hessian_lower_bound_small_r():
    r = 1e-4
    for C in (1.0, 1.5):
        val = hessian_lower_bound(2, r, 1.0, 0.3, C)
        assert val == pytest.approx(2 * 1 / C ** 2, rel=0.01)


def test_hessian_lower_bound_positive_inside_radius():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.uniform(1.1, 4)
        k, delta, C = rng.uniform(0.1, 2), rng.uniform(0.05, 1), rng.uniform(1, 2)
        r = 0.9 * uniqueness_radius(p, k, delta, C)
        assert hessian_lower_bound(p, r, k, delta, C) > 0


def test_hessian_upper_bound_examples():
    assert hessian_upper_bound(2, 1.0, 0.0, 0.0, 1.0) == pytest.approx(2.0)
    assert hessian_upper_bound(2, 1.0, 1e-9, 0.0, 1.0) == pytest.approx(2.0)
    assert hessian_upper_bound(2, 1.0, 1.0, 0.1, 1.0) == pytest.approx(2 * (1 / np.tanh(1.0) + 0.1))
    assert step_majorant is hessian_upper_bound


@settings(max_examples=100, deadline=None)
@given(st.floats(1.01, 5), st.floats(1e-3, 3), st.floats(0, 2), st.floats(0, 1), st.floats(1, 3))
def test_upper_bound_monotone(p, r, beta, dprime, D):
    base = hessian_upper_bound(p, r, beta, dprime, D)
    assert base >= 0
    assert hessian_upper_bound(p, r, beta, dprime + 0.1, D) > base
    assert hessian_upper_bound(p, r, beta, dprime, D + 0.1) > base
    assert base >= hessian_lower_bound(p, r, 0.0, 0.0, 1.0) - 1e-12 * base


@settings(max_examples=100, deadline=None)
@given(st.floats(1.05, 4), st.floats(0.01, 3), st.floats(0.01, 2), st.floats(1, 3))
def test_uniqueness_radius_monotone(p, k, delta, C):
    R = uniqueness_radius(p, k, delta, C)
    assert uniqueness_radius(p, k * 1.1, delta, C) <= R + 1e-15
    assert uniqueness_radius(p, k, delta * 1.1, C) <= R + 1e-15
    assert uniqueness_radius(p, k, delta, C * 1.1) <= R + 1e-15
    if p < 2:
        assert uniqueness_radius(min(p * 1.05, 2), k, delta, C) >= R - 1e-15
    else:
        assert uniqueness_radius(p, k, delta, C) == uniqueness_radius(2, k, delta, C)


def test_existence_ball_and_support_condition():
    assert existence_ball(1, 1) == 2
    assert existence_ball(2, 0.5) == 3
    bound = uniqueness_radius(2, 1.0, 1.0, 1.0) / 4
    assert support_condition(bound * 0.99, 2, 1.0, 1.0, 1.0)
    assert not support_condition(bound * 1.01, 2, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        existence_ball(0.5, 1)


def test_mean_problem_bounds_validation():
    MeanProblemBounds(2, CurvatureBounds(), 1.0, np.zeros(2))
    with pytest.raises(InvalidInputError):
        MeanProblemBounds(0.5, CurvatureBounds(), 1.0, np.zeros(2))
    with pytest.raises(InvalidInputError):
        CurvatureBounds(C=0.5)


def test_step_majorant_measure_examples():
    mu = WeightedSampleMeasure([[0.7, 0.0]])
    r = 0.7
    assert step_majorant_measure(E2, mu, [0.0, 0.0], 3, 1.0, 0.2, 1.3) == \
        pytest.approx(hessian_upper_bound(3, r, 1.0, 0.2, 1.3))
    mu = WeightedSampleMeasure(np.random.default_rng(1).normal(size=(5, 2)))
    assert step_majorant_measure(E2, mu, [0.1, 0.2], 2, 0.0, 0.0, 1.0) == pytest.approx(2.0)
    two = WeightedSampleMeasure([[0.5, 0.0], [-1.2, 0.0]], [0.3, 0.7])
    expected = 0.3 * 2 * (0.5 / np.tanh(0.5)) + 0.7 * 2 * (1.2 / np.tanh(1.2))
    assert step_majorant_measure(E2, two, [0.0, 0.0], 2, 1.0, 0.0, 1.0) == pytest.approx(expected)


def test_step_majorant_measure_linear_in_weights():
    pts = [[0.5, 0.1], [-0.4, 0.3], [0.2, -0.9]]
    w1, w2 = np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.1, 0.3])
    f = lambda w: step_majorant_measure(E2, WeightedSampleMeasure(pts, w), [0.0, 0.0], 2.5, 0.7, 0.1, 1.2)
    assert f(0.25 * w1 + 0.75 * w2) == pytest.approx(0.25 * f(w1) + 0.75 * f(w2), rel=1e-12)


def test_step_majorant_singular_at_atom():
    mu = WeightedSampleMeasure([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(SingularMajorantError):
        step_majorant_measure(E2, mu, [0.0, 0.0], 1.5, 1.0, 0.0, 1.0)
    assert step_majorant_measure(E2, mu, [0.0, 0.0], 2, 0.0, 0.0, 1.0) == pytest.approx(2.0)


def test_step_constant_CH_examples():
    mu = WeightedSampleMeasure([[0.0, 0.0], [1.0, 1.0], [-1.0, 0.5]])
    assert step_constant_CH(E2, mu, 2, CurvatureBounds(), [0, 0], 2.0) == pytest.approx(2.5)
    with pytest.raises(SingularMajorantError):
        step_constant_CH(E2, mu, 1.5, CurvatureBounds(), [0, 0], 2.0)


def test_step_constant_CH_dense_oracle_randers_1d():
    mu = WeightedSampleMeasure([[-0.4], [0.9]], [0.35, 0.65])
    b = CurvatureBounds(beta=1.0, delta_prime=0.2, C=3.0, D=3.0)
    ch = step_constant_CH(R1, mu, 2, b, [0.0], 1.0)
    # dense oracle over the same forward ball: F(x) <= 1 means x in [-2, 2/3]
    xs = np.linspace(-2.0, 2.0 / 3.0, 1000)
    dense = max(step_majorant_measure(R1, mu, [x], 2, 1.0, 0.2, 3.0) for x in xs)
    assert ch / 1.25 == pytest.approx(dense, rel=0.02)


def test_step_constant_CH_monotone_in_radius():
    mu = WeightedSampleMeasure([[0.3, 0.2], [-0.5, 0.4], [0.1, -0.6]])
    b = CurvatureBounds(beta=1.0, delta_prime=0.3, D=1.2)
    M = bundled_manifolds()["flat-randers"]
    values = [step_constant_CH(M, mu, 2.5, b, [0.0, 0.0], r) for r in (0.5, 1.0, 1.5, 2.0, 3.0)]
    assert all(b2 >= b1 for b1, b2 in zip(values, values[1:]))


def test_ball_grid_inside_forward_ball():
    M = bundled_manifolds()["flat-randers"]
    pts = ball_grid(M, [0.0, 0.0], 1.0)
    assert len(pts) > 20
    assert np.all(M.norm_at([0, 0])(pts) <= 1.0 + 1e-12)


def test_median_convexity_margin_examples():
    mu1 = WeightedSampleMeasure([[-1.0], [2.0]])
    M1 = FlatManifold(EuclideanNorm(np.eye(1)))
    assert median_convexity_margin(M1, mu1, [[0.0]], 0.0, 0.3) == pytest.approx(-0.3)
    mu = WeightedSampleMeasure([[1.0, 0.0], [-1.0, 0.0]])
    eta = median_convexity_margin(E2, mu, [[0.0, 0.0]], 0.0, 0.0)
    # v = (0, 1) is orthogonal to both atoms and gives integrand 1; other v give less
    assert 0 <= eta <= 1.0
    m1 = median_convexity_margin(E2, mu, [[0.0, 0.5]], 0.0, 0.1)
    m2 = median_convexity_margin(E2, mu, [[0.0, 0.5]], 0.0, 0.05)
    assert m2 == pytest.approx(m1 + 0.05)
    with pytest.raises(OutOfComparisonRangeError):
        median_convexity_margin(E2, WeightedSampleMeasure([[4.0, 0.0]]), [[0.0, 0.0]], 1.0, 0.0)


def test_median_convexity_margin_positive_off_line():
    mu = WeightedSampleMeasure([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.5]])
    assert median_convexity_margin(E2, mu, [[0.1, 0.2], [-0.2, 0.1]], 0.0, 0.0) > 0


def test_injectivity_conditions_report_both():
    out = injectivity_conditions(CurvatureBounds(C=1.5, inj=5.0), 2, 1.2)
    assert out["inj_exceeds_C2_plus_C_plus_1"] is True  # 5 > 4.75
    assert out["inj_exceeds_C2_plus_C_plus_1_times_R"] is False  # 5 < 5.7
    assert out["inj_exceeds_R_unique"] is False  # R_unique is infinite here
