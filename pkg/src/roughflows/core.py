"""
Time grids, spatial samples, evaluable vector fields and sample norms.

Shape conventions
-----------------
Points are arrays of shape ``(n, d)``.  A field with ``out_dim = q`` returns
its k-th derivative at ``n`` points as an array of shape ``(n, q, d, ..., d)``
with ``k`` trailing spatial axes, so ``derivative(x, 1)[:, i, j]`` is
``d f^i / d x_j``.  Scalar maps use ``q = 1``.

All sups over the domain are taken over a finite :class:`SpaceSample`, so the
norms computed here are sample norms: lower bounds for the true norms, monotone
under enlargement of the sample.
"""
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
import math

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, DerivativeOrderError

MAX_DYADIC_LEVEL = 20


# ---------------------------------------------------------------------------
# Time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeInterval:
    """Closed interval ``[s, t]`` inside a horizon ``[0, T]``."""

    s: float
    t: float
    T: float = None

    def __post_init__(self):
        T = self.t if self.T is None else self.T
        object.__setattr__(self, "T", float(T))
        if not self.s <= self.t:
            raise ConfigurationError(f"need s <= t, got s={self.s}, t={self.t}")
        if self.T <= 0 or self.t > self.T * (1 + 1e-12):
            raise ConfigurationError(f"need 0 < t <= T, got t={self.t}, T={self.T}")
        if self.s < 0:
            raise ConfigurationError(f"need s >= 0, got {self.s}")

    @property
    def length(self):
        return self.t - self.s


@dataclass(frozen=True)
class Partition:
    """Strictly increasing sequence of times ``s = s_0 < ... < s_n = t``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise ConfigurationError("a partition needs at least one point")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise ConfigurationError("partition points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def mesh(self):
        return float(np.max(np.diff(self.points))) if self.points.size > 1 else 0.0

    @property
    def n_cells(self):
        return self.points.size - 1

    def cells(self):
        """Pairs ``(s_i, s_{i+1})`` as an array of shape (n_cells, 2)."""
        return np.stack([self.points[:-1], self.points[1:]], axis=1)

    def refines(self, other, atol=1e-12):
        """True if every point of ``other`` is (up to ``atol``) a point of ``self``."""
        idx = np.searchsorted(self.points, other.points - atol)
        idx = np.clip(idx, 0, self.points.size - 1)
        return bool(np.all(np.abs(self.points[idx] - other.points) <= atol))


def dyadic_partition(interval, level, max_level=MAX_DYADIC_LEVEL):
    """Partition of ``interval`` into ``2**level`` equal cells."""
    level = int(level)
    if level < 0 or level > max_level:
        raise ConfigurationError(f"dyadic level {level} outside [0, {max_level}]")
    n = 2**level
    pts = interval.s + (interval.t - interval.s) * np.arange(n + 1) / n
    pts[-1] = interval.t
    return Partition(pts)


def dyadic_time_pairs(T, max_level=6, t0=0.0):
    """All pairs ``s < t`` of points of the level-``max_level`` dyadic grid of ``[t0, T]``.

    Returns an array of shape (P, 2) with columns ``(s, t)``.
    """
    grid = dyadic_partition(TimeInterval(t0, T, T), max_level).points
    i, j = np.triu_indices(grid.size, k=1)
    return np.stack([grid[i], grid[j]], axis=1)


# ---------------------------------------------------------------------------
# Space
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceSample:
    """Finite proxy for a box domain: sample points plus close pairs for Hölder quotients.

    ``pair_x[i]`` and ``pair_y[i]`` form the i-th pair, with ``0 < |x - y| <= 1``.
    """

    points: np.ndarray
    pair_x: np.ndarray
    pair_y: np.ndarray
    box: np.ndarray = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        px = np.asarray(self.pair_x, dtype=float).reshape(-1, pts.shape[1])
        py = np.asarray(self.pair_y, dtype=float).reshape(-1, pts.shape[1])
        if px.shape != py.shape:
            raise ConfigurationError("pair arrays must have equal shapes")
        if px.shape[0]:
            dist = np.linalg.norm(px - py, axis=1)
            if np.any(dist <= 0) or np.any(dist > 1 + 1e-12):
                raise ConfigurationError("sample pairs must satisfy 0 < |x - y| <= 1")
        box = None if self.box is None else np.asarray(self.box, dtype=float).reshape(-1, 2)
        if box is not None:
            everything = np.concatenate([pts, px, py])
            if np.any(everything < box[:, 0] - 1e-12) or np.any(everything > box[:, 1] + 1e-12):
                raise ConfigurationError("sample points must lie in the box")
        for arr in (pts, px, py):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "pair_x", px)
        object.__setattr__(self, "pair_y", py)
        object.__setattr__(self, "box", box)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def pair_distances(self):
        return np.linalg.norm(self.pair_x - self.pair_y, axis=1)

    @classmethod
    def quasi_random(cls, box, n_points=256, n_pairs=512, seed=0):
        """Scrambled-Sobol points in ``box`` and random close pairs.

        Pair partners are drawn at log-uniform distances in ``[1e-3, 1]`` so
        that Hölder quotients see small scales, then clipped to the box.
        """
        box = np.asarray(box, dtype=float).reshape(-1, 2)
        d = box.shape[0]
        lo, hi = box[:, 0], box[:, 1]
        rng = np.random.default_rng(seed)
        sobol = qmc.Sobol(d, scramble=True, seed=rng)
        pts = lo + (hi - lo) * sobol.random(n_points)
        base = lo + (hi - lo) * rng.random((n_pairs, d))
        direction = rng.standard_normal((n_pairs, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = 10.0 ** rng.uniform(-3.0, 0.0, size=(n_pairs, 1))
        partner = np.clip(base + radius * direction, lo, hi)
        dist = np.linalg.norm(partner - base, axis=1)
        keep = (dist > 0) & (dist <= 1)
        return cls(pts, base[keep], partner[keep], box)

    @classmethod
    def from_points(cls, points, pairs=None, box=None):
        """Sample from explicit points; ``pairs`` is an optional (m, 2, d) array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pairs is None:
            i, j = np.triu_indices(pts.shape[0], k=1)
            dist = np.linalg.norm(pts[i] - pts[j], axis=1)
            keep = (dist > 0) & (dist <= 1)
            px, py = pts[i[keep]], pts[j[keep]]
        else:
            pairs = np.asarray(pairs, dtype=float).reshape(-1, 2, pts.shape[1])
            px, py = pairs[:, 0], pairs[:, 1]
        return cls(pts, px, py, box)

    def union(self, other):
        return SpaceSample(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.pair_x, other.pair_x]),
            np.concatenate([self.pair_y, other.pair_y]),
            None,
        )


# ---------------------------------------------------------------------------
# Evaluable fields
# ---------------------------------------------------------------------------


class FieldEval:
    """A map ``R^d -> R^q`` with derivatives up to ``order``.

    Subclasses implement :meth:`_derivative`.  Querying a derivative above the
    declared order raises :class:`DerivativeOrderError`.
    """

    analytic = True

    def __init__(self, dim, out_dim, order):
        self.dim = int(dim)
        self.out_dim = int(out_dim)
        self.order = int(order)

    def derivative(self, x, k=0):
        if k > self.order:
            raise DerivativeOrderError(
                f"derivative of order {k} requested from a field of order {self.order}"
            )
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self._derivative(x[None, :], k)[0]
        return self._derivative(x, k)

    def __call__(self, x):
        return self.derivative(x, 0)

    def jet(self, x, order):
        return [self.derivative(x, k) for k in range(order + 1)]

    def _derivative(self, x, k):
        raise NotImplementedError


class AnalyticField(FieldEval):
    """Field given by callables ``funcs[k](x) -> k-th derivative array``."""

    def __init__(self, funcs, dim, out_dim):
        super().__init__(dim, out_dim, len(funcs) - 1)
        self._funcs = tuple(funcs)

    def _derivative(self, x, k):
        return np.asarray(self._funcs[k](x), dtype=float)


class ScalarField(AnalyticField):
    """Real-valued field from callables returning (n,), (n, d), (n, d, d), ..."""

    def __init__(self, funcs, dim):
        super().__init__(funcs, dim, 1)

    def _derivative(self, x, k):
        return np.asarray(self._funcs[k](x), dtype=float)[:, None]


class FiniteDifferenceField(FieldEval):
    """Central-difference derivatives of a map given only by its values.

    The k-th derivative differences the (k-1)-th with step ``h``, so the error
    is O(h**2) per level for smooth maps.
    """

    analytic = False

    def __init__(self, func, dim, out_dim, order=3, h=1e-4):
        super().__init__(dim, out_dim, order)
        self._func = func
        self.h = float(h)

    def _derivative(self, x, k):
        if k == 0:
            return np.asarray(self._func(x), dtype=float).reshape(x.shape[0], self.out_dim)
        cols = []
        for j in range(self.dim):
            step = np.zeros(self.dim)
            step[j] = self.h
            cols.append(
                (self._derivative(x + step, k - 1) - self._derivative(x - step, k - 1))
                / (2 * self.h)
            )
        return np.stack(cols, axis=-1)


class ConstantField(FieldEval):
    def __init__(self, value, order=3):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        super().__init__(value.size, value.size, order)
        self.value = value

    def _derivative(self, x, k):
        n = x.shape[0]
        if k == 0:
            return np.broadcast_to(self.value, (n, self.out_dim)).copy()
        return np.zeros((n, self.out_dim) + (self.dim,) * k)


class LinearField(FieldEval):
    """Affine field ``x -> A x + b``."""

    def __init__(self, matrix, offset=None, order=3):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        super().__init__(matrix.shape[1], matrix.shape[0], order)
        self.matrix = matrix
        self.offset = np.zeros(matrix.shape[0]) if offset is None else np.asarray(offset, float)

    def _derivative(self, x, k):
        n = x.shape[0]
        if k == 0:
            return x @ self.matrix.T + self.offset
        if k == 1:
            return np.broadcast_to(self.matrix, (n,) + self.matrix.shape).copy()
        return np.zeros((n, self.out_dim) + (self.dim,) * k)


class LinearCombination(FieldEval):
    """``sum_k coeffs[k] * fields[k]``."""

    def __init__(self, fields, coeffs):
        fields = list(fields)
        super().__init__(fields[0].dim, fields[0].out_dim, min(f.order for f in fields))
        self.fields = fields
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.analytic = all(f.analytic for f in fields)

    def _derivative(self, x, k):
        out = 0.0
        for c, f in zip(self.coeffs, self.fields):
            if c != 0.0:
                out = out + c * f.derivative(x, k)
        if np.isscalar(out):
            return np.zeros((x.shape[0], self.out_dim) + (self.dim,) * k)
        return out


def bracket_jet(e_jet, u_jet, order):
    """Derivatives of ``x -> (De(x)) u(x)`` from jets of ``e`` and ``u``.

    ``e_jet[m]`` has shape (..., n, d, d^m) and must reach order ``order + 1``;
    ``u_jet[m]`` has the same layout up to ``order``.  Leading axes broadcast.
    Supports ``order <= 2``.
    """
    if order > 2:
        raise DerivativeOrderError("bracket derivatives are implemented up to order 2")
    out = [np.einsum("...ia,...a->...i", e_jet[1], u_jet[0])]
    if order >= 1:
        out.append(
            np.einsum("...iab,...a->...ib", e_jet[2], u_jet[0])
            + np.einsum("...ia,...ab->...ib", e_jet[1], u_jet[1])
        )
    if order >= 2:
        out.append(
            np.einsum("...iabc,...a->...ibc", e_jet[3], u_jet[0])
            + np.einsum("...iab,...ac->...ibc", e_jet[2], u_jet[1])
            + np.einsum("...iac,...ab->...ibc", e_jet[2], u_jet[1])
            + np.einsum("...ia,...abc->...ibc", e_jet[1], u_jet[2])
        )
    return out


class BracketField(FieldEval):
    """The field ``(u.e)(x) := (De)(x) u(x)``, i.e. ``e`` differentiated along ``u``."""

    def __init__(self, u, e):
        order = min(e.order - 1, u.order, 2)
        if order < 0:
            raise DerivativeOrderError("bracket needs a differentiable field")
        super().__init__(e.dim, e.out_dim, order)
        self.u, self.e = u, e
        self.analytic = u.analytic and e.analytic

    def _derivative(self, x, k):
        return bracket_jet(self.e.jet(x, k + 1), self.u.jet(x, k), k)[k]


def stack_jets(fields, x, order):
    """Jets of several fields stacked on a leading axis: list of (l, n, q, d^m)."""
    return [np.stack([f.derivative(x, m) for f in fields]) for m in range(order + 1)]


# ---------------------------------------------------------------------------
# Sample norms
# ---------------------------------------------------------------------------


def multi_indices(dim, k):
    """Multi-indices of length ``k`` as sorted index tuples (one per D^alpha)."""
    return list(combinations_with_replacement(range(dim), k))


def _select(arr, alpha):
    """``arr[:, :, a1, ..., ak]`` for a multi-index given as an index tuple."""
    return arr[(slice(None), slice(None)) + tuple(alpha)]


def _values(f, x):
    if isinstance(f, FieldEval):
        return f.derivative(x, 0)
    v = np.asarray(f(x), dtype=float)
    return v.reshape(x.shape[0], -1)


def hoelder_quotient(f, sample, rho):
    """Max over sampled pairs of ``|f(x) - f(y)| / |x - y|**rho`` (sup norm on values).

    A lower bound for the true Hölder seminorm over the sampled region.
    """
    if not 0 < rho <= 1:
        raise ConfigurationError(f"rho must lie in (0, 1], got {rho}")
    if sample.pair_x.shape[0] == 0:
        raise ConfigurationError("sample has no pairs")
    diff = np.abs(_values(f, sample.pair_x) - _values(f, sample.pair_y)).max(axis=1)
    return float(np.max(diff / sample.pair_distances**rho))


def cr_norm(f, sample, order, rho):
    """Sample version of ``||f||_{C^{order + rho}}``.

    Sum over multi-indices ``|alpha| <= order`` of ``sup |D^alpha f|`` plus, for
    each ``|alpha| = order``, the Hölder quotient of ``D^alpha f`` over the
    sample pairs.  Vector values are measured in the sup norm.
    """
    if order > f.order:
        raise DerivativeOrderError(f"norm of order {order} needs a field of order >= {order}")
    if sample.pair_x.shape[0] == 0:
        raise ConfigurationError("sample has no pairs")
    total = 0.0
    for k in range(order + 1):
        dk = f.derivative(sample.points, k)
        for alpha in multi_indices(f.dim, k):
            total += float(np.max(np.abs(_select(dk, alpha))))
    dx = f.derivative(sample.pair_x, order)
    dy = f.derivative(sample.pair_y, order)
    scale = sample.pair_distances**rho
    for alpha in multi_indices(f.dim, order):
        diff = np.abs(_select(dx, alpha) - _select(dy, alpha)).max(axis=1)
        total += float(np.max(diff / scale))
    return total


def sup_norm(f, sample):
    """``max_x |f(x)|`` over the sample points (sup norm on values)."""
    return float(np.max(np.abs(_values(f, sample.points))))


@dataclass(frozen=True)
class DriverParams:
    """Regularity exponents ``p`` in (2, 3) and ``rho`` in (p - 2, 1]."""

    p: float
    rho: float
    well_posed: bool = field(init=False)

    def __post_init__(self):
        if not 2 < self.p < 3:
            raise ConfigurationError(f"p must lie in (2, 3), got {self.p}")
        if not self.p - 2 < self.rho <= 1:
            raise ConfigurationError(f"rho must lie in (p - 2, 1], got {self.rho}")
        object.__setattr__(self, "well_posed", self.rho > self.p / 3)

    @property
    def a(self):
        """Approximate-flow exponent ``3 / p``."""
        return 3.0 / self.p

    @property
    def theoretical_rate(self):
        """Exponent ``3 rho / p - 1`` of the partition error of the flow solver."""
        return 3.0 * self.rho / self.p - 1.0


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x`` over positive entries."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])
