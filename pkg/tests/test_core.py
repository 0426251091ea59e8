import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import roughflows as rf
from roughflows.core import hoelder_quotient, sup_norm


# -- partitions --------------------------------------------------------------


def test_dyadic_level_zero():
    p = rf.dyadic_partition(rf.TimeInterval(0, 1), 0)
    np.testing.assert_array_equal(p.points, [0.0, 1.0])
    assert p.mesh == 1.0


def test_dyadic_level_three():
    p = rf.dyadic_partition(rf.TimeInterval(0, 1), 3)
    assert p.points.size == 9
    assert p.mesh == 0.125


def test_dyadic_shifted_interval():
    p = rf.dyadic_partition(rf.TimeInterval(0.5, 1.5), 1)
    np.testing.assert_array_equal(p.points, [0.5, 1.0, 1.5])


def test_dyadic_level_overflow():
    with pytest.raises(rf.ConfigurationError):
        rf.dyadic_partition(rf.TimeInterval(0, 1), 21)
    with pytest.raises(rf.ConfigurationError):
        rf.dyadic_partition(rf.TimeInterval(0, 1), 5, max_level=4)


@given(st.integers(0, 10), st.floats(0, 5), st.floats(0.01, 5))
def test_dyadic_refinement(level, s, length):
    interval = rf.TimeInterval(s, s + length, s + length)
    fine = rf.dyadic_partition(interval, level + 1)
    coarse = rf.dyadic_partition(interval, level)
    assert fine.refines(coarse)
    assert fine.n_cells == 2 ** (level + 1)


def test_partition_rejects_non_monotone():
    with pytest.raises(rf.ConfigurationError):
        rf.Partition([0.0, 0.5, 0.5, 1.0])


def test_time_interval_validation():
    with pytest.raises(rf.ConfigurationError):
        rf.TimeInterval(0.5, 0.2)
    with pytest.raises(rf.ConfigurationError):
        rf.TimeInterval(0.0, 2.0, 1.0)


def test_dyadic_time_pairs():
    pairs = rf.dyadic_time_pairs(1.0, 2)
    assert pairs.shape == (10, 2)
    assert np.all(pairs[:, 0] < pairs[:, 1])


# -- samples -----------------------------------------------------------------


def test_space_sample_pairs_in_range(sample2, box2):
    d = sample2.pair_distances
    assert np.all(d > 0) and np.all(d <= 1)
    for arr in (sample2.points, sample2.pair_x, sample2.pair_y):
        assert np.all(arr >= box2[:, 0]) and np.all(arr <= box2[:, 1])


def test_space_sample_rejects_far_pairs():
    with pytest.raises(rf.ConfigurationError):
        rf.SpaceSample.from_points([[0.0], [3.0]], pairs=[[[0.0], [3.0]]])


def test_space_sample_is_immutable(sample2):
    with pytest.raises(ValueError):
        sample2.points[0, 0] = 5.0


# -- fields ------------------------------------------------------------------


def test_derivative_order_enforced():
    f = rf.ConstantField([1.0, 2.0], order=1)
    with pytest.raises(rf.DerivativeOrderError):
        f.derivative(np.zeros((1, 2)), 2)


def test_linear_field_derivatives():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    f = rf.LinearField(A, [1.0, -1.0])
    x = np.array([[1.0, 1.0]])
    np.testing.assert_allclose(f(x), [[4.0, 6.0]])
    np.testing.assert_allclose(f.derivative(x, 1)[0], A)
    assert f.derivative(x, 2).shape == (1, 2, 2, 2)


def _sin_cos_field():
    return rf.AnalyticField(
        [
            lambda x: np.stack([np.sin(x[:, 0]) * x[:, 1], np.cos(x[:, 1])], 1),
            lambda x: np.stack(
                [
                    np.stack([np.cos(x[:, 0]) * x[:, 1], np.sin(x[:, 0])], 1),
                    np.stack([0 * x[:, 0], -np.sin(x[:, 1])], 1),
                ],
                1,
            ),
        ],
        2,
        2,
    )


def test_finite_difference_second_order_accuracy():
    exact = _sin_cos_field()
    x = np.random.default_rng(3).uniform(-1, 1, (20, 2))
    errs = []
    for h in (1e-2, 5e-3):
        fd = rf.FiniteDifferenceField(lambda y: exact(y), 2, 2, order=1, h=h)
        errs.append(np.max(np.abs(fd.derivative(x, 1) - exact.derivative(x, 1))))
    ratio = errs[0] / errs[1]
    assert 3.0 <= ratio <= 5.0
    assert not rf.FiniteDifferenceField(lambda y: y, 2, 2).analytic


def test_bracket_field_matches_finite_difference():
    e = _sin_cos_field()
    u = rf.LinearField([[0.0, 1.0], [-1.0, 0.0]])
    x = np.random.default_rng(4).uniform(-1, 1, (10, 2))
    br = rf.BracketField(u, e)
    h = 1e-6
    ux = u(x)
    fd = (e(x + h * ux) - e(x - h * ux)) / (2 * h)
    np.testing.assert_allclose(br(x), fd, atol=1e-8)


# -- norms -------------------------------------------------------------------


def test_hoelder_quotient_constant():
    s = rf.SpaceSample.from_points(np.linspace(0, 1, 5)[:, None])
    assert hoelder_quotient(lambda x: np.full(x.shape[0], 3.0), s, 0.5) == 0.0


def test_hoelder_quotient_identity_lipschitz():
    s = rf.SpaceSample.from_points(np.random.default_rng(0).uniform(0, 1, (10, 1)))
    assert hoelder_quotient(lambda x: x[:, 0], s, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_hoelder_quotient_square_root():
    pairs = [[[0.0], [d]] for d in (1.0, 0.25, 0.0625)]
    s = rf.SpaceSample.from_points([[0.0]], pairs=pairs)
    q = hoelder_quotient(lambda x: np.sqrt(np.abs(x[:, 0])), s, 0.5)
    assert q == pytest.approx(1.0, abs=1e-12)


def test_hoelder_quotient_empty_pairs():
    s = rf.SpaceSample.from_points([[0.0]], pairs=np.zeros((0, 2, 1)))
    with pytest.raises(rf.ConfigurationError):
        hoelder_quotient(lambda x: x[:, 0], s, 1.0)


def test_cr_norm_zero_and_constant(sample2):
    assert rf.cr_norm(rf.ConstantField([0.0, 0.0]), sample2, 2, 0.5) == 0.0
    assert rf.cr_norm(rf.ConstantField([2.0, -1.0]), sample2, 1, 1.0) == 2.0


def test_cr_norm_sine():
    # sup|sin| + sup|cos| + sup|sin| + Lip(-sin) = 4 on a dense sample of [-pi, pi]
    pts = np.linspace(-np.pi, np.pi, 2001)[:, None]
    pairs = np.stack([pts[:-1], pts[1:]], axis=1)
    s = rf.SpaceSample.from_points(pts, pairs=pairs)
    f = rf.AnalyticField(
        [lambda x: np.sin(x), lambda x: np.cos(x)[:, :, None], lambda x: -np.sin(x)[:, :, None, None]],
        1,
        1,
    )
    assert rf.cr_norm(f, s, 2, 1.0) == pytest.approx(4.0, abs=1e-5)


def test_cr_norm_order_error(sample2):
    with pytest.raises(rf.DerivativeOrderError):
        rf.cr_norm(rf.ConstantField([1.0, 1.0], order=1), sample2, 2, 0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000))
def test_norms_monotone_under_enlargement(seed):
    box = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    a = rf.SpaceSample.quasi_random(box, 8, 8, seed)
    b = rf.SpaceSample.quasi_random(box, 8, 8, seed + 1)
    f = _sin_cos_field()
    both = a.union(b)
    assert rf.cr_norm(f, both, 1, 0.7) >= rf.cr_norm(f, a, 1, 0.7)
    assert hoelder_quotient(f, both, 0.7) >= hoelder_quotient(f, a, 0.7)
    assert sup_norm(f, both) >= sup_norm(f, a)


def test_norms_invariant_under_relabeling(sample2):
    perm = np.random.default_rng(1).permutation(sample2.points.shape[0])
    pperm = np.random.default_rng(2).permutation(sample2.pair_x.shape[0])
    s = rf.SpaceSample(sample2.points[perm], sample2.pair_x[pperm], sample2.pair_y[pperm])
    f = _sin_cos_field()
    assert rf.cr_norm(f, s, 1, 0.5) == rf.cr_norm(f, sample2, 1, 0.5)


# -- parameters --------------------------------------------------------------


def test_driver_params_validation():
    with pytest.raises(rf.ConfigurationError):
        rf.DriverParams(3.0, 0.9)
    with pytest.raises(rf.ConfigurationError):
        rf.DriverParams(2.5, 0.4)
    assert rf.DriverParams(2.2, 0.9).well_posed
    assert not rf.DriverParams(2.7, 0.8).well_posed
    assert rf.DriverParams(2.05, 0.95).theoretical_rate == pytest.approx(3 * 0.95 / 2.05 - 1)


def test_loglog_slope():
    x = np.array([1.0, 0.5, 0.25, 0.125])
    assert rf.loglog_slope(x, 3 * x**1.5) == pytest.approx(1.5)
    assert np.isnan(rf.loglog_slope([1.0], [1.0]))
