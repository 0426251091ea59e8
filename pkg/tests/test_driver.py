import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import roughflows as rf
from roughflows.driver import (
    FunctionPath,
    GridPath,
    apply_field,
    leibniz_defect,
    second_level_apply,
)
from conftest import linear_scalar, quadratic_scalar, smooth_scalar

P25 = rf.DriverParams(2.5, 0.9)


def _zero_field(d):
    return rf.ConstantField(np.zeros(d))


def _commutator_driver(params):
    """V_ts = B1_ts d1 + B2_ts x1 d2 with B = (t, t^2) and W forced to zero."""
    e1 = rf.ConstantField([1.0, 0.0])
    e2 = rf.LinearField([[0.0, 0.0], [1.0, 0.0]])

    def V(s, t):
        return rf.LinearCombination([e1, e2], [t - s, t * t - s * s])

    return rf.FunctionalDriver(V, lambda s, t: _zero_field(2), params, 1.0, 2)


# -- second level ------------------------------------------------------------


def test_second_level_zero_driver(sample2, params):
    z = rf.zero_driver(2, params)
    assert np.all(second_level_apply(z, 0.1, 0.7, smooth_scalar(), sample2.points) == 0)


def test_second_level_constant_field_linear_f(params):
    c = rf.constant_driver([0.3, -0.8], params)
    x = np.random.default_rng(0).uniform(-1, 1, (10, 2))
    np.testing.assert_allclose(second_level_apply(c, 0.0, 1.0, linear_scalar([2.0, 1.0]), x), 0.0,
                               atol=1e-15)


def test_second_level_constant_field_quadratic_f(params):
    c = np.array([0.3, -0.8])
    drv = rf.constant_driver(c, params)
    x = np.random.default_rng(0).uniform(-1, 1, (10, 2))
    got = second_level_apply(drv, 0.0, 1.0, quadratic_scalar(2), x)
    np.testing.assert_allclose(got, 0.5 * c @ c, rtol=1e-14)


def test_apply_field():
    f = quadratic_scalar(2)
    x = np.array([[1.0, 2.0]])
    assert apply_field(rf.ConstantField([1.0, 1.0]), f, x)[0] == pytest.approx(3.0)


# -- additivity and Chen -----------------------------------------------------


def test_chen_zero_driver(sample2, params):
    assert rf.chen_defect(rf.zero_driver(2, params), 0.1, 0.3, 0.9, sample2) == 0.0


def test_chen_mode_driver(brownian_driver, sample2):
    g = brownian_driver.grid
    rng = np.random.default_rng(0)
    for _ in range(20):
        i, j, k = np.sort(rng.choice(g.size, 3, replace=False))
        assert rf.chen_defect(brownian_driver, g[i], g[j], g[k], sample2) <= 1e-10
        assert rf.additivity_defect(brownian_driver, g[i], g[j], g[k], sample2.points) <= 1e-12


def test_chen_defect_of_forced_zero_area(sample2, params):
    drv = _commutator_driver(params)
    s, u, t = 0.1, 0.4, 0.9
    b_us = np.array([u - s, u * u - s * s])
    b_tu = np.array([t - u, t * t - u * u])
    # independent evaluation of 1/2 [V_us, V_tu]: (e1.e2) - (e2.e1) = (0, 1)
    expected = 0.5 * abs(b_us[0] * b_tu[1] - b_us[1] * b_tu[0])
    assert rf.chen_defect(drv, s, u, t, sample2) == pytest.approx(expected, rel=1e-12)


def test_grid_driver_rejects_off_grid(brownian_driver):
    g = brownian_driver.grid
    with pytest.raises(rf.OffGridError):
        brownian_driver.V(g[1] + 0.3 * (g[2] - g[1]), g[5])


def test_grid_path_tolerates_float_noise():
    times = np.linspace(0, 1, 11)
    p = GridPath(times, np.arange(11.0)[:, None])
    b, _ = p.increments(0.1 + 1e-15, 0.7)
    assert b[0] == pytest.approx(6.0)


def test_analytic_path_chen(sample2, params):
    # smooth coefficient path (t, t^2) with its exact iterated-integral area
    path = FunctionPath(
        lambda t: np.stack([t, t * t], axis=-1),
        lambda t: (np.asarray(t)[..., None, None] ** 3 / 6.0) * np.array([[0.0, 1.0], [-1.0, 0.0]]),
        2,
        1.0,
    )
    basis = [rf.ConstantField([1.0, 0.0]), rf.LinearField([[0.0, 0.0], [1.0, 0.0]])]
    drv = rf.CoefficientDriver(basis, path, params)
    rng = np.random.default_rng(1)
    for s, u, t in np.sort(rng.uniform(0, 1, (50, 3)), axis=1):
        assert rf.chen_defect(drv, s, u, t, sample2) <= 1e-9
        assert rf.additivity_defect(drv, s, u, t, sample2.points) <= 1e-9


# -- reversal ----------------------------------------------------------------


def test_time_reverse_involution(brownian_driver, sample2):
    a = brownian_driver.T
    twice = rf.time_reverse(rf.time_reverse(brownian_driver, a), a)
    g = brownian_driver.grid
    x = sample2.points
    for i, j in [(0, 100), (37, 900), (512, 1024)]:
        np.testing.assert_array_equal(twice.V(g[i], g[j])(x), brownian_driver.V(g[i], g[j])(x))
        np.testing.assert_array_equal(twice.W(g[i], g[j])(x), brownian_driver.W(g[i], g[j])(x))


def test_time_reverse_involution_functional(sample2, params):
    drv = _commutator_driver(params)
    twice = rf.time_reverse(rf.time_reverse(drv, 1.0), 1.0)
    x = sample2.points
    np.testing.assert_allclose(twice.V(0.2, 0.7)(x), drv.V(0.2, 0.7)(x), atol=1e-15)


def test_time_reverse_norm_equality(brownian_driver, sample2):
    pairs = rf.dyadic_time_pairs(1.0, 4)
    n1 = rf.driver_norm(brownian_driver, pairs, sample2)
    n2 = rf.driver_norm(rf.time_reverse(brownian_driver, 1.0), pairs, sample2)
    assert n2.v_part == pytest.approx(n1.v_part, rel=1e-12)
    assert n2.w_part == pytest.approx(n1.w_part, rel=1e-12)


def test_time_reverse_constant_driver(params):
    c = np.array([0.5, -1.0])
    rev = rf.time_reverse(rf.constant_driver(c, params), 1.0)
    x = np.zeros((3, 2))
    # the reversed driver runs the translation backwards
    np.testing.assert_allclose(rev.V(0.2, 0.6)(x), np.tile(-0.4 * c, (3, 1)), atol=1e-15)
    np.testing.assert_array_equal(rev.W(0.2, 0.6)(x), 0.0)


def test_time_reverse_preserves_chen(brownian_driver, sample2):
    rev = rf.time_reverse(brownian_driver, 1.0)
    g = rev.grid
    assert rf.chen_defect(rev, g[10], g[400], g[1000], sample2) <= 1e-10


def test_time_reverse_range():
    with pytest.raises(rf.ConfigurationError):
        rf.time_reverse(rf.zero_driver(1, P25), 1.5)


# -- dilation and norms ------------------------------------------------------


def test_dilate_identity(brownian_driver, sample2):
    g = brownian_driver.grid
    d = rf.dilate(brownian_driver, 1.0)
    x = sample2.points
    np.testing.assert_array_equal(d.V(g[3], g[70])(x), brownian_driver.V(g[3], g[70])(x))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.01, 10))
def test_dilate_composition(e1, e2):
    params = rf.DriverParams(2.2, 0.9)
    basis = rf.ModeBasis.gaussian(2, 2, [1.0, 1.0])
    drv = rf.mode_driver(rf.simulate_brownian_field(basis, 1.0, 64, 0), params)
    x = np.array([[0.1, -0.3], [0.5, 0.5]])
    a = rf.dilate(rf.dilate(drv, e1), e2)
    b = rf.dilate(drv, e1 * e2)
    g = drv.grid
    np.testing.assert_allclose(a.W(g[2], g[50])(x), b.W(g[2], g[50])(x), rtol=1e-12, atol=1e-300)


def test_driver_norm_zero(sample2, params):
    rep = rf.driver_norm(rf.zero_driver(2, params), rf.dyadic_time_pairs(1.0, 3), sample2)
    assert rep.norm == 0.0


def test_driver_norm_constant_1d():
    s = rf.SpaceSample.from_points(np.linspace(-1, 1, 11)[:, None])
    drv = rf.constant_driver([1.0], P25)
    rep = rf.driver_norm(drv, rf.dyadic_time_pairs(1.0, 4), s)
    assert rep.v_part == pytest.approx(1.0, abs=1e-12)
    assert rep.w_part == 0.0
    half = rf.driver_norm(rf.dilate(drv, 0.5), rf.dyadic_time_pairs(1.0, 4), s)
    assert half.v_part == pytest.approx(0.5, abs=1e-12)
    assert half.w_part == 0.0


def test_driver_norm_scaling(brownian_driver, sample2):
    pairs = rf.dyadic_time_pairs(1.0, 3)
    n1 = rf.driver_norm(brownian_driver, pairs, sample2)
    n2 = rf.driver_norm(rf.dilate(brownian_driver, 3.0), pairs, sample2)
    assert n2.v_part == pytest.approx(3 * n1.v_part, rel=1e-12)
    assert n2.w_part == pytest.approx(9 * n1.w_part, rel=1e-12)
    assert n1.norm == max(n1.v_part, n1.w_part)


def test_driver_norm_empty_pairs(sample2, params):
    with pytest.raises(rf.ConfigurationError):
        rf.driver_norm(rf.zero_driver(2, params), np.zeros((0, 2)), sample2)


# -- metrics -----------------------------------------------------------------


@pytest.fixture(scope="module")
def lift_family(brownian_field, params):
    return [
        rf.piecewise_linear_lift(
            brownian_field.samples(), rf.dyadic_partition(rf.TimeInterval(0, 1), k), params
        )
        for k in (2, 4, 6)
    ]


def test_dist_self_zero_and_symmetric(brownian_driver, lift_family, sample2):
    pairs = rf.dyadic_time_pairs(1.0, 4)
    assert rf.driver_dist(brownian_driver, brownian_driver, pairs, sample2) == 0.0
    for h in (False, True):
        a = rf.driver_dist(brownian_driver, lift_family[0], pairs, sample2, homogeneous=h)
        b = rf.driver_dist(lift_family[0], brownian_driver, pairs, sample2, homogeneous=h)
        assert a == pytest.approx(b, rel=1e-12)


def test_homogeneous_metric_scaling(brownian_driver, lift_family, sample2):
    pairs = rf.dyadic_time_pairs(1.0, 4)
    base = rf.driver_dist(brownian_driver, lift_family[1], pairs, sample2, homogeneous=True)
    for eps in (1e-3, 0.1, 7.0):
        got = rf.driver_dist(rf.dilate(brownian_driver, eps), rf.dilate(lift_family[1], eps), pairs,
                             sample2, homogeneous=True)
        assert abs(got - eps * base) <= 1e-12 * (1 + base)


def test_homogeneous_triangle_inequality(brownian_driver, lift_family, sample2):
    pairs = rf.dyadic_time_pairs(1.0, 4)
    drivers = [brownian_driver] + lift_family

    def d(a, b):
        return rf.driver_dist(a, b, pairs, sample2, homogeneous=True)

    for i in range(4):
        for j in range(4):
            for k in range(4):
                assert d(drivers[i], drivers[k]) <= d(drivers[i], drivers[j]) + d(drivers[j], drivers[k]) + 1e-12


def test_dist_parameter_mismatch(sample2):
    a = rf.zero_driver(2, rf.DriverParams(2.2, 0.9))
    b = rf.zero_driver(2, rf.DriverParams(2.3, 0.9))
    with pytest.raises(rf.ParameterMismatchError):
        rf.driver_dist(a, b, rf.dyadic_time_pairs(1.0, 2), sample2)


def test_dist_parts(brownian_driver, lift_family, sample2):
    pairs = rf.dyadic_time_pairs(1.0, 4)
    d, v, w = rf.driver_dist(brownian_driver, lift_family[0], pairs, sample2, parts=True)
    assert d == max(v, w)


# -- first-order check -------------------------------------------------------


def test_leibniz_defect_vector_field_vs_second_order(brownian_driver, sample2):
    f = smooth_scalar()
    g = quadratic_scalar(2)
    x = sample2.points
    grid = brownian_driver.grid
    s, t = grid[0], grid[-1]
    W = brownian_driver.W(s, t)
    first = leibniz_defect(lambda h: apply_field(W, h, x), f, g, x)
    second = leibniz_defect(lambda h: second_level_apply(brownian_driver, s, t, h, x), f, g, x)
    assert first <= 1e-12
    assert second > 1e-6
