"""
Rough drivers: pairs ``(V_ts, W_ts)`` of vector fields indexed by time pairs.

Most drivers built by this package share one structure: a fixed family of
basis fields ``e_1, ..., e_l`` and a coefficient path ``b_t`` in ``R^l`` with
antisymmetric area ``A_ts``,

    V_ts = sum_k b^k_ts e_k,        W_ts = sum_{j,k} A^{jk}_ts (e_j . e_k),

where ``(u . e) := (De) u``.  :class:`CoefficientDriver` implements this; the
time dependence lives in a :class:`CoefficientPath`.  Arbitrary drivers can be
given through :class:`FunctionalDriver`.

The second-level operator is ``VV_ts = W_ts + 1/2 V_ts V_ts`` with vector
fields acting as first-order differential operators.
"""
from dataclasses import dataclass

import numpy as np

from .core import (
    ConstantField,
    FieldEval,
    LinearCombination,
    LinearField,
    bracket_jet,
    cr_norm,
    dyadic_time_pairs,
    multi_indices,
    stack_jets,
)
from .errors import ConfigurationError, OffGridError, ParameterMismatchError
from . import kernels

TOL_ALG_ANALYTIC = 1e-9
TOL_ALG_GRID = 1e-7


def _antisym_outer(x, y):
    """``1/2 (x (x) y - y (x) x)`` over trailing axes."""
    return 0.5 * (x[..., :, None] * y[..., None, :] - y[..., :, None] * x[..., None, :])


# ---------------------------------------------------------------------------
# Coefficient paths
# ---------------------------------------------------------------------------


class CoefficientPath:
    """Path ``b_t`` in ``R^l`` on ``[0, T]`` together with its area ``A_ts``.

    ``increments(s, t)`` returns ``(b_ts, A_ts)`` and broadcasts over array
    arguments; ``A_ts`` is antisymmetric and satisfies the area Chen relation.
    """

    dim = 0
    T = 1.0
    grid = None
    deterministic = True

    def increments(self, s, t):
        raise NotImplementedError

    def values(self, times):
        """``b_t - b_0`` at the given times."""
        times = np.asarray(times, dtype=float)
        return self.increments(np.zeros_like(times), times)[0]

    def _check_range(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        tol = 1e-12 * max(1.0, self.T)
        if np.any(s > t + tol) or np.any(s < -tol) or np.any(t > self.T + tol):
            raise OffGridError(f"times outside 0 <= s <= t <= T={self.T}")
        return s, t


def _chen_from_origin(x_s, x_t, a_s, a_t):
    """Increment and area over ``[s, t]`` from values and areas anchored at 0."""
    b = x_t - x_s
    return b, a_t - a_s - _antisym_outer(x_s, b)


class GridPath(CoefficientPath):
    """Coefficient path stored on a time grid; only grid times are queryable.

    Cumulative areas ``A_{t_i, t_0}`` are accumulated with the midpoint rule
    unless given explicitly.
    """

    deterministic = False

    def __init__(self, times, values, areas=None, deterministic=False):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != times.size:
            raise ConfigurationError("values must have shape (len(times), l)")
        if times.size < 2 or not np.all(np.diff(times) > 0):
            raise ConfigurationError("grid times must be strictly increasing")
        self.times = times
        self.dim = values.shape[1]
        self.T = float(times[-1])
        self._t0 = float(times[0])
        self.grid = times
        self.deterministic = deterministic
        x = values - values[0]
        self._x = x
        self._areas = (
            kernels.levy_area_cumulative(x) if areas is None else np.asarray(areas, float)
        )
        uniform = np.diff(times)
        self._uniform = np.allclose(uniform, uniform[0], rtol=1e-9, atol=0)
        self._dt = float(uniform[0])

    @property
    def path_values(self):
        return self._x

    @property
    def cumulative_areas(self):
        return self._areas

    def index(self, t):
        t = np.asarray(t, dtype=float)
        if self._uniform:
            idx = np.rint((t - self._t0) / self._dt).astype(int)
        else:
            idx = np.searchsorted(self.times, t - 1e-12 * max(1.0, self.T))
        idx = np.clip(idx, 0, self.times.size - 1)
        if np.any(np.abs(self.times[idx] - t) > 1e-9 * max(1.0, self.T)):
            bad = np.atleast_1d(t)[np.atleast_1d(np.abs(self.times[idx] - t) > 1e-9)]
            raise OffGridError(f"time(s) {bad[:3]} not on the stored grid")
        return idx

    def increments(self, s, t):
        s, t = self._check_range(s, t)
        i, j = self.index(s), self.index(t)
        return _chen_from_origin(self._x[i], self._x[j], self._areas[i], self._areas[j])


class PiecewiseLinearPath(CoefficientPath):
    """Linear interpolation of knot values, queryable at any time.

    Linear segments carry no area, so the area of the path is the exact
    polygonal area computed knot by knot.
    """

    def __init__(self, knots, values, deterministic=True):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != knots.size:
            raise ConfigurationError("values must have shape (len(knots), l)")
        if knots.size < 2 or not np.all(np.diff(knots) > 0):
            raise ConfigurationError("knots must be strictly increasing")
        self.knots = knots
        self.dim = values.shape[1]
        self.T = float(knots[-1])
        self.deterministic = deterministic
        self._x = values - values[0]
        self._areas = kernels.levy_area_cumulative(self._x)

    def _anchored(self, t):
        k = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.knots.size - 2)
        frac = (t - self.knots[k]) / (self.knots[k + 1] - self.knots[k])
        base = self._x[k]
        step = frac[..., None] * (self._x[k + 1] - base)
        return base + step, self._areas[k] + _antisym_outer(base, step)

    def increments(self, s, t):
        s, t = self._check_range(s, t)
        x_s, a_s = self._anchored(s)
        x_t, a_t = self._anchored(t)
        return _chen_from_origin(x_s, x_t, a_s, a_t)


class FunctionPath(CoefficientPath):
    """Path given by closed forms ``value(t)`` and ``area(t) = A_{t,0}``."""

    def __init__(self, value, area, dim, T):
        self._value = value
        self._area = area
        self.dim = int(dim)
        self.T = float(T)

    def increments(self, s, t):
        s, t = self._check_range(s, t)
        x_s, x_t = self._value(s), self._value(t)
        return _chen_from_origin(x_s - self._value(np.zeros_like(s)),
                                 x_t - self._value(np.zeros_like(t)),
                                 self._area(s), self._area(t))


def linear_time_path(dim=1, T=1.0, rate=None):
    """``b_t = t * rate`` (rate defaults to ones); zero area."""
    rate = np.ones(dim) if rate is None else np.asarray(rate, dtype=float)
    return FunctionPath(
        lambda t: np.asarray(t)[..., None] * rate,
        lambda t: np.zeros(np.shape(t) + (rate.size, rate.size)),
        rate.size,
        T,
    )


class ReversedPath(CoefficientPath):
    """The path run backwards from ``a``: ``r -> b_{a - r}``.

    Increments over ``[s, t]`` are minus the increments of ``b`` over
    ``[a - t, a - s]``; areas are negated as well.
    """

    def __init__(self, base, a):
        if not 0 < a <= base.T * (1 + 1e-12):
            raise ConfigurationError(f"reversal time must lie in (0, T], got {a}")
        self.base = base
        self.a = float(a)
        self.dim = base.dim
        self.T = float(a)
        self.deterministic = base.deterministic
        if base.grid is not None:
            g = base.grid[base.grid <= a + 1e-9 * max(1.0, a)]
            self.grid = np.sort(a - g)

    def increments(self, s, t):
        s, t = self._check_range(s, t)
        b, area = self.base.increments(self.a - t, self.a - s)
        return -b, -area


class ScaledPath(CoefficientPath):
    """Dilation: ``(eps b, eps^2 A)``."""

    def __init__(self, base, eps):
        self.base = base
        self.eps = float(eps)
        self.dim = base.dim
        self.T = base.T
        self.grid = base.grid
        self.deterministic = base.deterministic

    def increments(self, s, t):
        b, area = self.base.increments(s, t)
        return self.eps * b, self.eps**2 * area


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


class RoughDriver:
    """Interface: ``vector_fields(s, t) -> (V_ts, W_ts)`` as :class:`FieldEval`."""

    params = None
    T = 1.0
    dim = 1
    grid = None
    tol_alg = TOL_ALG_ANALYTIC

    def vector_fields(self, s, t):
        raise NotImplementedError

    def V(self, s, t):
        return self.vector_fields(s, t)[0]

    def W(self, s, t):
        return self.vector_fields(s, t)[1]


class WField(FieldEval):
    """``sum_{j,k} A^{jk} (e_j . e_k)`` for a basis with stacked jets."""

    def __init__(self, basis, area):
        order = min(min(e.order for e in basis) - 1, 2)
        super().__init__(basis[0].dim, basis[0].out_dim, order)
        self.basis = basis
        self.area = np.asarray(area, dtype=float)
        self.analytic = all(e.analytic for e in basis)

    def _derivative(self, x, k):
        jets = stack_jets(self.basis, x, k + 1)
        # u_k = sum_j A^{jk} e_j, then W = sum_k (De_k) u_k
        u = [np.einsum("jk,j...->k...", self.area, e) for e in jets[: k + 1]]
        return bracket_jet(jets, u, k)[k].sum(axis=0)


class CoefficientDriver(RoughDriver):
    """``V_ts = sum b^k_ts e_k`` and ``W_ts = sum A^{jk}_ts (e_j . e_k)``."""

    def __init__(self, basis, path, params):
        basis = list(basis) if not hasattr(basis, "kernel_params") else basis
        if len(basis) != path.dim:
            raise ConfigurationError(
                f"basis has {len(basis)} fields but the path has dimension {path.dim}"
            )
        self.basis = basis
        self.path = path
        self.params = params
        self.T = path.T
        self.dim = basis[0].dim
        self.grid = path.grid
        self.tol_alg = TOL_ALG_GRID if path.grid is not None else TOL_ALG_ANALYTIC

    def coefficients(self, s, t):
        return self.path.increments(s, t)

    def vector_fields(self, s, t):
        b, area = self.coefficients(s, t)
        return LinearCombination(self.basis, b), WField(self.basis, area)


class FunctionalDriver(RoughDriver):
    """Driver from user callables ``V(s, t) -> FieldEval`` and ``W(s, t) -> FieldEval``.

    ``W`` must already be a vector field; see :func:`leibniz_defect` for a
    check of a user second-order operator.
    """

    def __init__(self, V, W, params, T, dim, grid=None, tol_alg=TOL_ALG_ANALYTIC):
        self._V, self._W = V, W
        self.params = params
        self.T = float(T)
        self.dim = int(dim)
        self.grid = grid
        self.tol_alg = tol_alg

    def vector_fields(self, s, t):
        return self._V(s, t), self._W(s, t)


def zero_driver(dim, params, T=1.0):
    return CoefficientDriver([ConstantField(np.zeros(dim))], linear_time_path(1, T), params)


def constant_driver(velocity, params, T=1.0):
    """``V_ts = (t - s) c``, ``W = 0``: the flow is a translation."""
    return CoefficientDriver([ConstantField(velocity)], linear_time_path(1, T), params)


def scalar_linear_driver(lam, h, params, T=1.0):
    """Driver on ``R`` with ``V_ts(x) = lam h_ts x`` for a scalar path ``h``."""
    path = FunctionPath(
        lambda t: np.asarray(h(t), dtype=float)[..., None],
        lambda t: np.zeros(np.shape(t) + (1, 1)),
        1,
        T,
    )
    return CoefficientDriver([LinearField([[lam]])], path, params)


# ---------------------------------------------------------------------------
# Operators and algebraic checks
# ---------------------------------------------------------------------------


def apply_field(vf, f, x, k=1):
    """``(V f)(x) = Df(x) V(x)`` for a scalar field ``f``."""
    return np.einsum("na,na->n", f.derivative(x, 1)[:, 0], vf.derivative(x, 0))


def second_level_apply(drv, s, t, f, x):
    """``(VV_ts f)(x) = (W_ts f)(x) + 1/2 (V_ts (V_ts f))(x)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    V, W = drv.vector_fields(s, t)
    v = V.derivative(x, 0)
    dv = V.derivative(x, 1)
    df = f.derivative(x, 1)[:, 0]
    d2f = f.derivative(x, 2)[:, 0].reshape(x.shape[0], x.shape[1], x.shape[1])
    wf = np.einsum("na,na->n", df, W.derivative(x, 0))
    vvf = np.einsum("nab,na,nb->n", d2f, v, v) + np.einsum("na,nab,nb->n", df, dv, v)
    return wf + 0.5 * vvf


def additivity_defect(drv, s, u, t, points):
    """``max |V_ts - V_tu - V_us|`` over the given points."""
    points = np.atleast_2d(points)
    diff = drv.V(s, t)(points) - drv.V(u, t)(points) - drv.V(s, u)(points)
    return float(np.max(np.abs(diff)))


def chen_defect(drv, s, u, t, sample):
    """``sup |W_ts - W_tu - W_us - 1/2 ((V_us . V_tu) - (V_tu . V_us))|`` over the sample."""
    pts = sample.points if hasattr(sample, "points") else np.atleast_2d(sample)
    v_us, w_us = drv.vector_fields(s, u)
    v_tu, w_tu = drv.vector_fields(u, t)
    _, w_ts = drv.vector_fields(s, t)
    a, da = v_us.derivative(pts, 0), v_us.derivative(pts, 1)
    b, db = v_tu.derivative(pts, 0), v_tu.derivative(pts, 1)
    bracket = np.einsum("nia,na->ni", db, a) - np.einsum("nia,na->ni", da, b)
    diff = w_ts(pts) - w_tu(pts) - w_us(pts) - 0.5 * bracket
    return float(np.max(np.abs(diff)))


def leibniz_defect(operator, f, g, points):
    """``max |L(fg) - f L(g) - g L(f)|`` for an operator acting on scalar fields.

    ``operator(h)`` must return the values of ``L h`` at ``points``.  A
    first-order operator (a vector field) has zero defect.
    """
    from .core import ScalarField

    points = np.atleast_2d(points)

    def prod_k(x, k):
        F = f.jet(x, k)
        G = g.jet(x, k)
        if k == 0:
            return (F[0] * G[0])[:, 0]
        if k == 1:
            return (F[1] * G[0][..., None] + F[0][..., None] * G[1])[:, 0]
        return (
            F[2] * G[0][..., None, None]
            + F[0][..., None, None] * G[2]
            + F[1][..., :, None] * G[1][..., None, :]
            + G[1][..., :, None] * F[1][..., None, :]
        )[:, 0]

    fg = ScalarField([lambda x, k=k: prod_k(x, k) for k in range(3)], f.dim)
    lhs = operator(fg)
    rhs = f(points)[:, 0] * operator(g) + g(points)[:, 0] * operator(f)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# Reversal and dilation
# ---------------------------------------------------------------------------


def _scaled(field_, c):
    return LinearCombination([field_], [c])


def time_reverse(drv, a):
    """Driver on ``[0, a]`` obtained by running ``drv`` backwards from time ``a``.

    With ``[s', t'] = [a - t, a - s]`` the reversed driver has
    ``V^a_ts = -V_{t's'}`` and ``W^a_ts = -W_{t's'}``, so its second level is
    ``VV^a_ts = -VV_{t's'} + V_{t's'} V_{t's'}`` and each time-1 map of the
    reversed driver inverts the corresponding map of ``drv``.
    """
    if not 0 < a <= drv.T * (1 + 1e-12):
        raise ConfigurationError(f"reversal time must lie in (0, {drv.T}], got {a}")
    if isinstance(drv, CoefficientDriver):
        if isinstance(drv.path, ReversedPath) and abs(drv.path.a - a) <= 1e-12 * max(1.0, a) \
                and abs(drv.path.base.T - a) <= 1e-12 * max(1.0, a):
            return CoefficientDriver(drv.basis, drv.path.base, drv.params)
        return CoefficientDriver(drv.basis, ReversedPath(drv.path, a), drv.params)

    def V(s, t):
        return _scaled(drv.V(a - t, a - s), -1.0)

    def W(s, t):
        return _scaled(drv.W(a - t, a - s), -1.0)

    grid = None if drv.grid is None else np.sort(a - drv.grid[drv.grid <= a + 1e-12])
    return FunctionalDriver(V, W, drv.params, a, drv.dim, grid, drv.tol_alg)


def dilate(drv, eps):
    """``delta_eps``: V scaled by ``eps``, W by ``eps**2``."""
    if eps <= 0:
        raise ConfigurationError(f"dilation factor must be positive, got {eps}")
    if isinstance(drv, CoefficientDriver):
        path = drv.path
        if isinstance(path, ScaledPath):
            path = ScaledPath(path.base, path.eps * eps)
        else:
            path = ScaledPath(path, eps)
        return CoefficientDriver(drv.basis, path, drv.params)
    return FunctionalDriver(
        lambda s, t: _scaled(drv.V(s, t), eps),
        lambda s, t: _scaled(drv.W(s, t), eps**2),
        drv.params,
        drv.T,
        drv.dim,
        drv.grid,
        drv.tol_alg,
    )


# ---------------------------------------------------------------------------
# Norms and metrics
# ---------------------------------------------------------------------------


class NormTable:
    """Sample-norm machinery for linear combinations of basis fields and brackets.

    ``v_norms(b)`` returns ``||sum b_k e_k||_{C^{2+rho}}`` and ``w_norms(A)``
    returns ``||sum A^{jk} (e_j . e_k)||_{C^{1+rho}}`` on the sample, both
    vectorised over leading axes of the coefficients.
    """

    def __init__(self, basis, sample, rho, v_order=2, w_order=1, chunk=256):
        self.rho = rho
        self.chunk = chunk
        self.v_order = v_order
        self.w_order = w_order
        ell = len(basis)
        d = basis[0].dim
        scale = sample.pair_distances**rho
        pts, px, py = sample.points, sample.pair_x, sample.pair_y
        jet_p = stack_jets(basis, pts, max(v_order, w_order + 1))
        jet_x = stack_jets(basis, px, max(v_order, w_order + 1))
        jet_y = stack_jets(basis, py, max(v_order, w_order + 1))

        self._v_sup = [
            self._flat(jet_p[k], alpha, ell)
            for k in range(v_order + 1)
            for alpha in multi_indices(d, k)
        ]
        self._v_hol = [
            (self._flat(jet_x[v_order], alpha, ell) - self._flat(jet_y[v_order], alpha, ell))
            / np.repeat(scale, basis[0].out_dim)[None, :]
            for alpha in multi_indices(d, v_order)
        ]

        def bracket_all(jet):
            # (e_j . e_k) for all j, k: axis order (j, k, n, q, ...)
            e = [j[None, :] for j in jet]
            u = [j[:, None] for j in jet]
            return bracket_jet(e, u, w_order)

        br_p, br_x, br_y = bracket_all(jet_p), bracket_all(jet_x), bracket_all(jet_y)
        self._w_sup = [
            self._flat(br_p[k].reshape((ell * ell,) + br_p[k].shape[2:]), alpha, ell * ell)
            for k in range(w_order + 1)
            for alpha in multi_indices(d, k)
        ]
        top_x = br_x[w_order].reshape((ell * ell,) + br_x[w_order].shape[2:])
        top_y = br_y[w_order].reshape((ell * ell,) + br_y[w_order].shape[2:])
        self._w_hol = [
            (self._flat(top_x, alpha, ell * ell) - self._flat(top_y, alpha, ell * ell))
            / np.repeat(scale, basis[0].out_dim)[None, :]
            for alpha in multi_indices(d, w_order)
        ]

    @staticmethod
    def _flat(arr, alpha, rows):
        sel = arr[(slice(None), slice(None), slice(None)) + tuple(alpha)]
        return sel.reshape(rows, -1)

    def _norms(self, coeffs, sups, hols):
        coeffs = np.asarray(coeffs, dtype=float)
        lead = coeffs.shape[:-1]
        flat = coeffs.reshape(-1, coeffs.shape[-1])
        out = np.zeros(flat.shape[0])
        for start in range(0, flat.shape[0], self.chunk):
            c = flat[start:start + self.chunk]
            acc = np.zeros(c.shape[0])
            for table in sups:
                acc += np.max(np.abs(c @ table), axis=1)
            for table in hols:
                acc += np.max(np.abs(c @ table), axis=1)
            out[start:start + self.chunk] = acc
        return out.reshape(lead)

    def v_norms(self, b):
        return self._norms(b, self._v_sup, self._v_hol)

    def w_norms(self, area):
        area = np.asarray(area, dtype=float)
        return self._norms(area.reshape(area.shape[:-2] + (-1,)), self._w_sup, self._w_hol)


@dataclass(frozen=True)
class DriverNormReport:
    v_part: float
    w_part: float
    norm: float
    time_pairs: np.ndarray


def default_time_pairs(drv, max_level=6):
    return dyadic_time_pairs(drv.T, max_level)


def _check_pairs(time_pairs):
    pairs = np.atleast_2d(np.asarray(time_pairs, dtype=float))
    if pairs.size == 0:
        raise ConfigurationError("time_pairs must be nonempty")
    if np.any(pairs[:, 1] <= pairs[:, 0]):
        raise ConfigurationError("time pairs need s < t")
    return pairs


def _coefficient_difference(d1, d2, s, t):
    """Stacked basis and coefficients of ``d1 - d2`` (both coefficient drivers)."""
    b1, a1 = d1.coefficients(s, t)
    if d2 is None:
        return d1.basis, b1, a1
    b2, a2 = d2.coefficients(s, t)
    if d1.basis is d2.basis:
        return d1.basis, b1 - b2, a1 - a2
    l1, l2 = b1.shape[-1], b2.shape[-1]
    b = np.concatenate([b1, -b2], axis=-1)
    area = np.zeros(a1.shape[:-2] + (l1 + l2, l1 + l2))
    area[..., :l1, :l1] = a1
    area[..., l1:, l1:] = -a2
    return list(d1.basis) + list(d2.basis), b, area


_TABLE_CACHE = {}


def norm_table(basis, sample, rho, v_order=2, w_order=1):
    """Cached :class:`NormTable` keyed on object identity of basis and sample."""
    key = (tuple(id(e) for e in basis), id(sample), rho, v_order, w_order)
    hit = _TABLE_CACHE.get(key)
    if hit is not None and hit[0] is sample and all(a is b for a, b in zip(hit[1], basis)):
        return hit[2]
    table = NormTable(basis, sample, rho, v_order, w_order)
    if len(_TABLE_CACHE) > 32:
        _TABLE_CACHE.clear()
    _TABLE_CACHE[key] = (sample, list(basis), table)
    return table


def pair_norms(d1, d2, pairs, sample, v_order=2, w_order=1, rho=None):
    """Raw ``||V1_ts - V2_ts||_{C^{v_order+rho}}`` and ``||W1_ts - W2_ts||_{C^{w_order+rho}}``.

    ``d2`` may be None.  Coefficient drivers use precomputed tables; other
    drivers are evaluated pair by pair.
    """
    rho = d1.params.rho if rho is None else rho
    pairs = np.atleast_2d(np.asarray(pairs, dtype=float))
    s, t = pairs[:, 0], pairs[:, 1]
    if isinstance(d1, CoefficientDriver) and (d2 is None or isinstance(d2, CoefficientDriver)):
        basis, b, area = _coefficient_difference(d1, d2, s, t)
        table = norm_table(basis, sample, rho, v_order, w_order)
        return table.v_norms(b), table.w_norms(area)
    v = np.empty(len(pairs))
    w = np.empty(len(pairs))
    for i, (si, ti) in enumerate(pairs):
        V1, W1 = d1.vector_fields(si, ti)
        if d2 is not None:
            V2, W2 = d2.vector_fields(si, ti)
            V1 = LinearCombination([V1, V2], [1.0, -1.0])
            W1 = LinearCombination([W1, W2], [1.0, -1.0])
        v[i] = cr_norm(V1, sample, v_order, rho)
        w[i] = cr_norm(W1, sample, w_order, rho)
    return v, w


def _rate_parts(d1, d2, pairs, sample):
    """Per-pair ``||dV||/|t-s|^{1/p}`` and ``||dW||/|t-s|^{2/p}``."""
    p = d1.params.p
    h = pairs[:, 1] - pairs[:, 0]
    v, w = pair_norms(d1, d2, pairs, sample)
    return v / h ** (1 / p), w / h ** (2 / p)


def driver_norm(drv, time_pairs, sample):
    """Sample version of ``||V||_{p,rho}`` over the given time pairs."""
    pairs = _check_pairs(time_pairs)
    v, w = _rate_parts(drv, None, pairs, sample)
    v_part, w_part = float(np.max(v)), float(np.max(w))
    return DriverNormReport(v_part, w_part, max(v_part, w_part), pairs)


def driver_dist(d1, d2, time_pairs, sample, homogeneous=False, parts=False):
    """Inhomogeneous metric ``d_{p,rho}`` or, with ``homogeneous``, the homogeneous one.

    With ``parts=True`` returns ``(distance, v_part, w_part)`` where ``w_part``
    is the W-difference rate before any square root.
    """
    if d1.params != d2.params:
        raise ParameterMismatchError("drivers have different (p, rho)")
    if abs(d1.T - d2.T) > 1e-12 * max(1.0, d1.T):
        raise ParameterMismatchError("drivers have different horizons")
    pairs = _check_pairs(time_pairs)
    v, w = _rate_parts(d1, d2, pairs, sample)
    v_part, w_part = float(np.max(v)), float(np.max(w))
    dist = max(v_part, np.sqrt(w_part)) if homogeneous else max(v_part, w_part)
    return (dist, v_part, w_part) if parts else dist
