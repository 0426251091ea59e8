"""
Sewing of almost-additive 2-index maps on dyadic partitions, the Itô
formula for sampled Hölder paths and its flow-functional version.
"""
from dataclasses import dataclass

import numpy as np

from .core import TimeInterval, dyadic_partition, loglog_slope
from .errors import ConfigurationError, DerivativeOrderError, OffGridError


class TwoIndexMap:
    """A map ``z(s, t)`` into ``R^m`` with declared almost-additivity exponent ``a > 1``.

    ``func`` is called with arrays ``s, t`` of equal shape and must return an
    array with those leading axes (``vectorized=True``), or with scalars.
    """

    def __init__(self, func, a, c1=None, vectorized=True):
        if not a > 1:
            raise ConfigurationError(f"almost-additivity exponent must exceed 1, got {a}")
        self.func = func
        self.a = float(a)
        self.c1 = c1
        self.vectorized = vectorized

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.vectorized:
            return np.asarray(self.func(s, t), dtype=float)
        return np.array([self.func(a, b) for a, b in zip(s.ravel(), t.ravel())], dtype=float)

    def cell_sums(self, points):
        """``z(s_i, s_{i+1})`` for consecutive points."""
        points = np.asarray(points, dtype=float)
        return self(points[:-1], points[1:])


def check_almost_additive(z, s, t, n_triples=64, seed=0):
    """Spot-check ``|z_tu + z_us - z_ts| <= c1 |t - s|^a`` on random triples.

    Returns ``(max_ratio, ok)`` with ``max_ratio`` the largest defect divided
    by ``|t - s|^a``; ``ok`` is None when no constant was declared.
    """
    rng = np.random.default_rng(seed)
    trip = np.sort(rng.uniform(s, t, size=(n_triples, 3)), axis=1)
    a_, u_, b_ = trip.T
    defect = np.abs(z(u_, b_) + z(a_, u_) - z(a_, b_)).reshape(n_triples, -1).max(axis=1)
    ratio = float(np.max(defect / np.maximum(b_ - a_, 1e-300) ** z.a))
    ok = None if z.c1 is None else ratio <= z.c1
    return ratio, ok


@dataclass
class SewingResult:
    """Dyadic sewing output.

    ``grid`` is the finest dyadic partition used and ``cumulative[i]`` is
    ``Z_{grid[i], grid[0]}``; ``Z(u, v)`` differences it, so additivity on
    the grid holds by telescoping.
    """

    value: np.ndarray
    grid: np.ndarray
    cumulative: np.ndarray
    level_sums: list
    level_diffs: list
    rate: float
    converged: bool
    final_level: int

    def Z(self, u, v):
        idx = np.clip(np.searchsorted(self.grid, [u - 1e-12, v - 1e-12]), 0, self.grid.size - 1)
        if np.any(np.abs(self.grid[idx] - [u, v]) > 1e-9 * max(1.0, self.grid[-1])):
            raise OffGridError("Z is available at points of the sewing grid only")
        return self.cumulative[idx[1]] - self.cumulative[idx[0]]


def sew(z, s, t, K_max=16, tol=1e-10, K_min=2):
    """``Z_ts = lim_k sum of z`` over the level-k dyadic partition of ``[s, t]``.

    Stops at the first level ``>= K_min`` whose sum moved by at most ``tol``;
    non-convergence by ``K_max`` is reported, not raised.
    """
    interval = TimeInterval(s, t, max(t, 1e-300))
    sums, diffs, meshes = [], [], []
    converged = False
    cells = None
    level = 0
    for level in range(K_max + 1):
        pts = dyadic_partition(interval, level).points
        cells = z.cell_sums(pts)
        sums.append(cells.sum(axis=0))
        if level > 0:
            diffs.append(float(np.max(np.abs(sums[-1] - sums[-2]))))
            meshes.append((t - s) / 2**level)
            if level >= K_min and diffs[-1] <= tol:
                converged = True
                break
    cumulative = np.concatenate([np.zeros((1,) + cells.shape[1:]), np.cumsum(cells, axis=0)])
    rate = loglog_slope(meshes, diffs) if len(diffs) >= 2 else float("nan")
    return SewingResult(sums[-1], pts, cumulative, sums, diffs, rate, converged, level)


# ---------------------------------------------------------------------------
# Itô formula
# ---------------------------------------------------------------------------


@dataclass
class ItoFunction:
    """``F(t, x)`` with spatial gradient, Hessian and optional time derivative.

    All callables take ``(t, x)`` with ``x`` of shape (n, d) and return
    (n,), (n, d), (n, d, d) and (n,) respectively.
    """

    value: object
    grad: object = None
    hess: object = None
    dt: object = None

    @classmethod
    def from_field(cls, f):
        """Time-independent ``F`` from a scalar :class:`FieldEval` of order >= 2."""
        if f.order < 2:
            raise DerivativeOrderError("the Itô formula needs second derivatives")
        return cls(
            lambda t, x: f.derivative(x, 0)[:, 0],
            lambda t, x: f.derivative(x, 1)[:, 0],
            lambda t, x: f.derivative(x, 2)[:, 0].reshape(x.shape[0], f.dim, f.dim),
        )


def _as_path(times, values):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return times, values


def _grid_index(times, pts):
    idx = np.clip(np.searchsorted(times, pts - 1e-12), 0, times.size - 1)
    if np.any(np.abs(times[idx] - pts) > 1e-9 * max(1.0, times[-1])):
        raise OffGridError("dyadic points must lie on the path grid")
    return idx


def ito_map(F, times, values):
    """The 2-index map ``z_ts = F'(x_s) x_ts + 1/2 F''(x_s) x_ts^(2)`` on grid times."""
    if F.grad is None or F.hess is None:
        raise DerivativeOrderError("F needs first and second spatial derivatives")
    times, values = _as_path(times, values)

    def z(s, t):
        i, j = _grid_index(times, s), _grid_index(times, t)
        xs = values[i].reshape(-1, values.shape[1])
        dx = (values[j] - values[i]).reshape(-1, values.shape[1])
        tt = np.asarray(s, dtype=float).ravel()
        out = np.einsum("na,na->n", F.grad(tt, xs), dx) + 0.5 * np.einsum(
            "nab,na,nb->n", F.hess(tt, xs), dx, dx
        )
        return out.reshape(np.shape(s))

    return z


@dataclass
class ItoResult:
    error: float
    increment: float
    time_integral: float
    sewn: float
    level_errors: list
    rate: float


def ito_reconstruct(F, times, values, interval=None, p=2.1):
    """``|F(t, x_t) - F(s, x_s) - int dF/dr dr - int z|`` for a sampled path.

    The sewing runs over the dyadic levels supported by the path grid; the
    time integral uses the trapezoidal rule on the path grid.  ``level_errors``
    holds the reconstruction error at every level and ``rate`` its fitted
    log-log slope against the mesh.
    """
    times, values = _as_path(times, values)
    interval = TimeInterval(times[0], times[-1], times[-1]) if interval is None else interval
    s, t = interval.s, interval.t
    i0, i1 = _grid_index(times, np.array([s, t]))
    n_cells = i1 - i0
    top = int(np.floor(np.log2(n_cells))) if n_cells > 0 else 0
    if n_cells and 2**top != n_cells:
        raise OffGridError("the interval must span 2^k path cells")
    zmap = TwoIndexMap(ito_map(F, times, values), a=3.0 / p)
    xs, xt = values[i0:i0 + 1], values[i1:i1 + 1]
    increment = float(F.value(np.array([t]), xt)[0] - F.value(np.array([s]), xs)[0])
    if F.dt is not None:
        seg = slice(i0, i1 + 1)
        rates = F.dt(times[seg], values[seg])
        time_integral = float(np.trapezoid(rates, times[seg]))
    else:
        time_integral = 0.0
    res = sew(zmap, s, t, K_max=top, tol=0.0, K_min=top)
    errors = [abs(increment - time_integral - float(v)) for v in res.level_sums]
    meshes = [(t - s) / 2**k for k in range(len(errors))]
    rate = loglog_slope(meshes[1:], errors[1:]) if len(errors) > 2 else float("nan")
    return ItoResult(errors[-1], increment, time_integral, float(res.value), errors, rate)


# ---------------------------------------------------------------------------
# Functionals of flows
# ---------------------------------------------------------------------------


@dataclass
class FlowFunctionalResult:
    error: float
    level_errors: list
    meshes: list
    rate: float


def _product_expansion(drv, s, t, f, Y):
    """``(V + VV) f`` at the stacked state ``Y`` (k, d) for the product-space lift.

    Every point moves under the same driver, so ``V`` acts on all k components
    simultaneously and ``VV = W + 1/2 V V`` includes the cross terms.
    """
    V, W = drv.vector_fields(s, t)
    v = V.derivative(Y, 0)
    dv = V.derivative(Y, 1)
    w = W.derivative(Y, 0)
    flat = Y.reshape(1, -1)
    df = f.derivative(flat, 1)[0, 0]
    d2f = f.derivative(flat, 2)[0, 0].reshape(flat.shape[1], flat.shape[1])
    vf = v.ravel()
    drift = np.einsum("mia,ma->mi", dv, v).ravel()
    return df @ vf + df @ w.ravel() + 0.5 * (vf @ d2f @ vf + df @ drift)


def flow_functional_sew(flow, points, f, interval=None, max_level=None):
    """Reconstruction error of ``f(phi_t(y_1), ..., phi_t(y_k)) - f(phi_s(y.))`` by sewing.

    ``f`` is a scalar field on ``R^(k d)`` (order >= 2) evaluated at the
    concatenated points.  The 2-index map is the second-order expansion of
    ``f`` along the flow of all k points driven jointly.
    """
    if f.order < 2:
        raise DerivativeOrderError("f needs second derivatives")
    Y0 = np.atleast_2d(np.asarray(points, dtype=float))
    interval = flow.interval if interval is None else interval
    top = flow.partition.n_cells.bit_length() - 1 if max_level is None else max_level
    fine = dyadic_partition(interval, top).points
    states = [Y0]
    for a, b in zip(fine[:-1], fine[1:]):
        states.append(flow.evaluate(a, b, states[-1]))
    states = np.stack(states)
    target = float(f(states[-1].reshape(1, -1))[0, 0] - f(Y0.reshape(1, -1))[0, 0])
    errors, meshes = [], []
    for level in range(top + 1):
        step = 2 ** (top - level)
        pts = fine[::step]
        total = 0.0
        for i, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
            total += _product_expansion(flow.driver, a, b, f, states[i * step])
        errors.append(abs(target - total))
        meshes.append(interval.length / 2**level)
    rate = loglog_slope(meshes[1:], errors[1:]) if len(errors) > 2 else float("nan")
    return FlowFunctionalResult(errors[-1], errors, meshes, rate)
