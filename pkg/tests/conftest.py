import numpy as np
import pytest

import roughflows as rf

BOX2 = np.array([[-1.0, 1.0], [-1.0, 1.0]])


@pytest.fixture(scope="session")
def box2():
    return BOX2


@pytest.fixture(scope="session")
def sample2():
    return rf.SpaceSample.quasi_random(BOX2, 64, 128, seed=0)


@pytest.fixture(scope="session")
def params():
    return rf.DriverParams(2.2, 0.9)


@pytest.fixture(scope="session")
def gauss_basis():
    return rf.ModeBasis.gaussian(2, 2, [0.1, 0.1], BOX2)


@pytest.fixture(scope="session")
def brownian_field(gauss_basis):
    return rf.simulate_brownian_field(gauss_basis, 1.0, 2**10, seed=11)


@pytest.fixture(scope="session")
def brownian_driver(brownian_field, params):
    return rf.mode_driver(brownian_field, params)


def smooth_scalar():
    """``f(x) = sin(x0) cos(x1)`` with derivatives to order 3."""
    def f0(x):
        return np.sin(x[:, 0]) * np.cos(x[:, 1])

    def f1(x):
        s0, c0, s1, c1 = np.sin(x[:, 0]), np.cos(x[:, 0]), np.sin(x[:, 1]), np.cos(x[:, 1])
        return np.stack([c0 * c1, -s0 * s1], axis=1)

    def f2(x):
        s0, c0, s1, c1 = np.sin(x[:, 0]), np.cos(x[:, 0]), np.sin(x[:, 1]), np.cos(x[:, 1])
        h = np.empty((x.shape[0], 2, 2))
        h[:, 0, 0] = -s0 * c1
        h[:, 0, 1] = h[:, 1, 0] = -c0 * s1
        h[:, 1, 1] = -s0 * c1
        return h

    def f3(x):
        s0, c0, s1, c1 = np.sin(x[:, 0]), np.cos(x[:, 0]), np.sin(x[:, 1]), np.cos(x[:, 1])
        t = np.empty((x.shape[0], 2, 2, 2))
        t[:, 0, 0, 0] = -c0 * c1
        t[:, 0, 0, 1] = t[:, 0, 1, 0] = t[:, 1, 0, 0] = s0 * s1
        t[:, 0, 1, 1] = t[:, 1, 0, 1] = t[:, 1, 1, 0] = -c0 * c1
        t[:, 1, 1, 1] = s0 * s1
        return t

    return rf.ScalarField([f0, f1, f2, f3], 2)


def quadratic_scalar(dim):
    """``f(x) = |x|^2 / 2``."""
    return rf.ScalarField(
        [
            lambda x: 0.5 * np.sum(x * x, axis=1),
            lambda x: x.copy(),
            lambda x: np.broadcast_to(np.eye(dim), (x.shape[0], dim, dim)).copy(),
            lambda x: np.zeros((x.shape[0],) + (dim,) * 3),
        ],
        dim,
    )


def linear_scalar(a):
    a = np.asarray(a, dtype=float)
    d = a.size
    return rf.ScalarField(
        [
            lambda x: x @ a,
            lambda x: np.broadcast_to(a, x.shape).copy(),
            lambda x: np.zeros((x.shape[0], d, d)),
            lambda x: np.zeros((x.shape[0], d, d, d)),
        ],
        d,
    )
