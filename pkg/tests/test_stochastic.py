import math

import numpy as np
import pytest

import roughflows as rf
from roughflows.stochastic import hoelder_statistic, random_cm_path, run_replicates
from conftest import BOX2


def _square(i):
    return i * i


# -- random streams ----------------------------------------------------------


def test_rng_streams_reproducible_and_distinct():
    a, b = rf.RngStreams(7), rf.RngStreams(7)
    assert a.seed(3) == b.seed(3)
    assert len({a.seed(i) for i in range(100)}) == 100
    np.testing.assert_array_equal(a.generator(1).standard_normal(4), b.generator(1).standard_normal(4))
    assert rf.RngStreams(8).seed(3) != a.seed(3)


def test_run_replicates_order_independent_of_workers():
    assert run_replicates(_square, 6, workers=1) == [0, 1, 4, 9, 16, 25]
    assert run_replicates(_square, 6, workers=2) == [0, 1, 4, 9, 16, 25]


# -- tail fits ---------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_tail_fit_gaussian(seed):
    fit = rf.TailFit.fit(np.random.default_rng(seed).standard_normal(10_000))
    assert fit.verdict is True and not fit.degenerate
    # true tail coefficient is 2
    assert 1.5 <= fit.c <= 3.0
    assert fit.n == 10_000


@pytest.mark.parametrize("seed", range(5))
def test_tail_fit_exponential(seed):
    x = np.random.default_rng(seed).exponential(size=10_000)
    assert rf.TailFit.fit(x).verdict is False


@pytest.mark.parametrize("seed", range(3))
def test_tail_fit_heavy_tail(seed):
    x = np.random.default_rng(seed).standard_t(2, 10_000)
    assert rf.TailFit.fit(x).verdict is False


def test_tail_fit_degenerate_and_small():
    fit = rf.TailFit.fit(np.full(500, 2.5))
    assert fit.degenerate and fit.verdict is None
    small = rf.TailFit.fit(np.random.default_rng(0).normal(size=50))
    assert small.verdict is None and not small.degenerate
    tiny = rf.TailFit.fit(np.random.default_rng(0).normal(size=10))
    assert tiny.verdict is None and not tiny.degenerate


def test_hoelder_statistic_constant_driver(sample2, params):
    drv = rf.constant_driver([1.0, 0.0], params)
    pairs = rf.dyadic_time_pairs(1.0, 3)
    v, w = hoelder_statistic(drv, pairs, sample2, 0.5, 1.5)
    # sup |t - s|^(1/2) over the pairs
    assert v == pytest.approx(1.0)
    assert w == 0.0


def test_kolmogorov_diagnostics_small(gauss_basis, params, sample2):
    def family(i):
        return rf.mode_driver(rf.simulate_brownian_field(gauss_basis, 1.0, 64, seed=i), params)

    stats, fit = rf.kolmogorov_diagnostics(family, 8, 1 / 2.2, 1.9, sample2, rf.dyadic_time_pairs(1.0, 3))
    assert stats.v_stats.shape == (8,) and np.all(stats.v_stats > 0)
    assert {"v_q50", "v_q90", "v_q99", "w_q50"} <= set(stats.quantiles)
    assert fit.verdict is None


# -- Cameron-Martin ----------------------------------------------------------


def test_cm_constant_path():
    h = rf.CameronMartinPath.constant([1.0, 2.0], T=2.0, n_cells=4, weights=[1.0, 4.0])
    np.testing.assert_allclose(h.values()[-1], [2.0, 4.0])
    np.testing.assert_allclose(h.at(0.5), [0.5, 1.0])
    # 2 * (1 / 1 + 4 / 4)
    assert rf.cm_inner(h, h) == pytest.approx(4.0, abs=1e-12)


def test_cm_inner_zero_weight():
    h = rf.CameronMartinPath.constant([1.0, 0.0], weights=[1.0, 0.0])
    assert rf.cm_inner(h, h) == pytest.approx(1.0)
    g = rf.CameronMartinPath.constant([1.0, 1.0], weights=[1.0, 0.0])
    assert math.isinf(rf.cm_inner(g, g))


def test_cm_inner_validation():
    a = rf.CameronMartinPath.constant([1.0], n_cells=2)
    b = rf.CameronMartinPath.constant([1.0], n_cells=3)
    with pytest.raises(rf.ConfigurationError):
        rf.cm_inner(a, b)
    with pytest.raises(rf.ConfigurationError):
        rf.CameronMartinPath([0.0, 1.0], np.zeros((2, 1)))


def test_sigma_gamma_single_constant_mode():
    basis = rf.ModeBasis.from_fields([rf.ConstantField([1.0, 0.0])], [4.0])
    s = rf.SpaceSample.quasi_random(BOX2, 8, 4, seed=0)
    sigma, mc, exact = rf.sigma_gamma(basis, s, n_draws=20_000)
    assert exact == pytest.approx(2.0)
    assert mc == pytest.approx(2.0, rel=0.03)
    assert sigma == max(mc, exact)


def test_cm_bounds_hold(gauss_basis, sample2):
    rng = np.random.default_rng(0)
    sigma = rf.sigma_gamma(gauss_basis, sample2)[0]
    for _ in range(10):
        h = random_cm_path(rng, 2, n_cells=16, weights=gauss_basis.weights)
        s, t = np.sort(rng.choice(h.times, 2, replace=False))
        rep = rf.cm_bounds_check(h, s, t, gauss_basis, sample2, sigma)
        assert rep.ok and rep.slack_increment >= 0


def test_smooth_lift_bounds_hold(gauss_basis, sample2):
    rng = np.random.default_rng(1)
    h = random_cm_path(rng, 2, n_cells=8, weights=gauss_basis.weights)
    rep = rf.smooth_lift_bounds(h, gauss_basis, sample2, 0.9)
    assert rep.ok
    assert rep.energy == pytest.approx(rf.cm_inner(h, h))


def test_smooth_lift_is_chen(gauss_basis, sample2, params):
    h = random_cm_path(np.random.default_rng(2), 2, n_cells=8, weights=gauss_basis.weights)
    drv = rf.smooth_lift(h, gauss_basis, params)
    assert rf.chen_defect(drv, 0.1, 0.45, 0.9, sample2) <= 1e-12


# -- rate function -----------------------------------------------------------


def test_rate_function_cm_path():
    h = rf.CameronMartinPath.constant([0.7], n_cells=4)
    assert rf.rate_function(h) == pytest.approx(0.245, abs=1e-12)


def test_rate_function_smooth_and_rough_drivers(gauss_basis, params):
    h = rf.CameronMartinPath.constant([0.3, -0.4], n_cells=64, weights=gauss_basis.weights)
    smooth = rf.smooth_lift(h, gauss_basis, params)
    assert rf.rate_function(smooth) == pytest.approx(0.5 * 0.25 / 0.1, rel=1e-12)
    field = rf.simulate_brownian_field(gauss_basis, 1.0, 2**10, seed=3)
    assert math.isinf(rf.rate_function(rf.mode_driver(field, params)))
    assert rf.rate_function(rf.zero_driver(2, params)) == 0.0


def test_rate_function_projection(gauss_basis, params):
    drv = rf.constant_driver([1.0, 0.0], params)
    assert math.isinf(rf.rate_function(drv, basis=gauss_basis))
    with pytest.raises(rf.ConfigurationError):
        rf.rate_function("not a path")


# -- Wong-Zakai --------------------------------------------------------------


def test_wong_zakai_small_run(gauss_basis, params):
    s = rf.SpaceSample.quasi_random(BOX2, 16, 16, seed=0)
    kw = dict(n_sim=2**10, sample=s, time_pairs=rf.dyadic_time_pairs(1.0, 3), tol_flow=1e-4)
    a = rf.wong_zakai_experiment(gauss_basis, 1.0, [2, 3, 4], 3, params, seed=5, **kw)
    b = rf.wong_zakai_experiment(gauss_basis, 1.0, [2, 3, 4], 3, params, seed=5, **kw)
    assert [r.level for r in a.rows] == [2, 3, 4]
    assert a.per_replicate.shape == (3, 3, 4)
    np.testing.assert_array_equal(a.per_replicate, b.per_replicate)
    assert a.rows[0].median_homog > a.rows[-1].median_homog


def test_wong_zakai_validation(gauss_basis, params):
    with pytest.raises(rf.ConfigurationError):
        rf.wong_zakai_experiment(gauss_basis, 1.0, [3, 3], 1, params)
    with pytest.raises(rf.ConfigurationError):
        rf.wong_zakai_experiment(gauss_basis, 1.0, [3, 5], 1, params, n_sim=24)


def test_wong_zakai_single_mode_has_no_area(params):
    basis = rf.ModeBasis.gaussian(2, 1, [0.1])
    s = rf.SpaceSample.quasi_random(BOX2, 16, 16, seed=0)
    res = rf.wong_zakai_experiment(basis, 1.0, [2, 3, 4], 3, params, seed=1, n_sim=2**10, sample=s,
                                   time_pairs=rf.dyadic_time_pairs(1.0, 5), tol_flow=1e-4)
    assert np.all(res.per_replicate[:, :, 1] == 0)
    dv = [r.median_dV for r in res.rows]
    assert dv[0] > dv[-1]


def test_smooth_lift_examples(gauss_basis, params, sample2):
    zero = rf.smooth_lift(rf.CameronMartinPath.constant([0.0, 0.0], n_cells=4), gauss_basis, params)
    assert np.all(zero.V(0.0, 1.0)(sample2.points) == 0) and np.all(zero.W(0.0, 1.0)(sample2.points) == 0)
    one = rf.ModeBasis.gaussian(2, 1, [0.1])
    h = random_cm_path(np.random.default_rng(3), 1, n_cells=8)
    assert np.all(rf.smooth_lift(h, one, params).W(0.0, 1.0)(sample2.points) == 0)
    # h = (t, t^2): area T^3 / 6 in the limit
    n = 512
    times = np.linspace(0, 1, n + 1)
    mid = 0.5 * (times[1:] + times[:-1])
    poly = rf.CameronMartinPath(times, np.stack([np.ones(n), 2 * mid], 1))
    area = rf.smooth_lift(poly, gauss_basis, params).path.increments(0.0, 1.0)[1][0, 1]
    assert area == pytest.approx(1 / 6, abs=1e-5)


def test_rate_function_rotation_invariance(params):
    # lambda-isotropic basis rotated by a random orthogonal matrix
    basis = rf.ModeBasis.gaussian(2, 3, [0.5, 0.5, 0.5], BOX2)
    R, _ = np.linalg.qr(np.random.default_rng(4).normal(size=(3, 3)))
    rotated = rf.ModeBasis.from_fields(
        [rf.LinearCombination(list(basis), R[j]) for j in range(3)], basis.weights
    )
    h = random_cm_path(np.random.default_rng(5), 3, n_cells=32, weights=basis.weights)
    drv = rf.smooth_lift(h, basis, params)
    s = rf.SpaceSample.quasi_random(BOX2, 128, 8, seed=0)
    assert rf.rate_function(drv, basis=rotated, sample=s) == pytest.approx(rf.rate_function(drv), abs=1e-10)
    assert rf.rate_function(drv) == pytest.approx(rf.rate_function(h), rel=1e-12)
