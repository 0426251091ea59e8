"""
Rough drivers from rough paths, finite-mode Brownian velocity fields and
piecewise-linear interpolations of sampled velocity fields.

A finite-mode velocity field is ``M_t(x) = sum_k B^k_t e_k(x)`` with
independent Brownian coefficients ``B^k`` of variance ``lambda_k t``.  Its
natural lift has ``V_ts = sum_k B^k_ts e_k`` and
``W_ts = sum_{j,k} A^{jk}_ts (e_j . e_k)`` with ``A`` the Lévy area of ``B``.
"""
import csv

import numpy as np
from scipy.stats import qmc

from .core import FieldEval, LinearCombination
from .driver import (
    CoefficientDriver,
    GridPath,
    PiecewiseLinearPath,
    TOL_ALG_GRID,
)
from .errors import ChenViolationError, ConfigurationError, OffGridError
from . import kernels


# ---------------------------------------------------------------------------
# Rough paths
# ---------------------------------------------------------------------------


class RoughPath:
    """Finite-dimensional rough path ``(X, XX)`` stored on a time grid.

    ``second_level`` holds ``XX_{t_i, t_0}`` for every grid time; when it is
    omitted the path is lifted geometrically with polygonal (midpoint) areas.
    Other grid pairs follow from Chen: ``XX_ts = XX_t0 - XX_s0 - X_s0 (x) X_ts``.
    """

    def __init__(self, times, values, second_level=None, p=2.5):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.times = times
        self.p = float(p)
        self._grid = GridPath(times, values)
        x = self._grid.path_values
        if second_level is None:
            second_level = 0.5 * x[:, :, None] * x[:, None, :] + self._grid.cumulative_areas
        self._xx = np.asarray(second_level, dtype=float)
        if self._xx.shape != (times.size, x.shape[1], x.shape[1]):
            raise ConfigurationError("second_level must have shape (len(times), l, l)")

    @classmethod
    def from_function(cls, func, T, n_steps, p=2.5):
        """Geometric lift of a smooth path sampled on ``n_steps`` equal cells."""
        times = np.linspace(0.0, T, n_steps + 1)
        return cls(times, np.asarray(func(times), dtype=float), p=p)

    @property
    def dim(self):
        return self._grid.dim

    def increment(self, s, t):
        i, j = self._grid.index(s), self._grid.index(t)
        x = self._grid.path_values
        return x[j] - x[i]

    def second_level(self, s, t):
        i, j = self._grid.index(s), self._grid.index(t)
        x = self._grid.path_values
        return self._xx[j] - self._xx[i] - x[i][..., :, None] * (x[j] - x[i])[..., None, :]

    def area_path(self):
        """Antisymmetric part of the second level as a coefficient path."""
        anti = 0.5 * (self._xx - np.swapaxes(self._xx, 1, 2))
        return GridPath(self.times, self._grid.path_values, anti, deterministic=True)

    def geometric_defect(self, pairs=None):
        """``max |Sym(XX_ts) - 1/2 X_ts (x) X_ts|`` over grid pairs (default: all from 0 and consecutive)."""
        if pairs is None:
            n = self.times.size
            i = np.concatenate([np.zeros(n - 1, int), np.arange(n - 1)])
            j = np.concatenate([np.arange(1, n), np.arange(1, n)])
            pairs = np.stack([self.times[i], self.times[j]], axis=1)
        pairs = np.asarray(pairs, dtype=float)
        xx = self.second_level(pairs[:, 0], pairs[:, 1])
        x = self.increment(pairs[:, 0], pairs[:, 1])
        sym = 0.5 * (xx + np.swapaxes(xx, 1, 2))
        return float(np.max(np.abs(sym - 0.5 * x[:, :, None] * x[:, None, :])))

    def chen_defect(self, s, u, t):
        lhs = self.second_level(s, t)
        rhs = self.second_level(u, t) + self.second_level(s, u) + np.multiply.outer(
            self.increment(s, u), self.increment(u, t)
        )
        return float(np.max(np.abs(lhs - rhs)))


def lift_rough_path(fields, rp, params, tol=TOL_ALG_GRID):
    """Driver ``V_ts = sum_i X^i_ts V_i``, ``W_ts = sum_{j,k} Anti(XX_ts)^{jk} (V_j . V_k)``.

    Raises :class:`ChenViolationError` when ``rp`` is not weakly geometric.
    """
    fields = list(fields)
    if len(fields) != rp.dim:
        raise ConfigurationError(f"{len(fields)} fields for a path of dimension {rp.dim}")
    defect = rp.geometric_defect()
    if defect > tol * max(1.0, float(np.max(np.abs(rp._xx)))):
        raise ChenViolationError(f"rough path is not weakly geometric (defect {defect:.3g})")
    return CoefficientDriver(fields, rp.area_path(), params)


# ---------------------------------------------------------------------------
# Mode bases
# ---------------------------------------------------------------------------


def profile_jet(x, k, family, c, phase, sigma, eta):
    """k-th derivative (n, d^k) of one scalar mode profile at points (n, d)."""
    d = x.shape[1]
    eye = np.eye(d)
    if family == kernels.TRIG:
        arg = x @ c + phase
        cs, sn = np.cos(arg), np.sin(arg)
        if k == 0:
            return cs
        if k == 1:
            return -sn[:, None] * c
        if k == 2:
            return -cs[:, None, None] * np.multiply.outer(c, c)
        return sn[:, None, None, None] * np.multiply.outer(np.multiply.outer(c, c), c)
    z = x - c
    s2 = sigma * sigma
    r2 = np.sum(z * z, axis=1) / s2
    if family == kernels.GAUSS:
        g = np.exp(-0.5 * r2)
        if k == 0:
            return g
        if k == 1:
            return -(g / s2)[:, None] * z
        zz = z[:, :, None] * z[:, None, :]
        if k == 2:
            return g[:, None, None] * (zz / s2**2 - eye / s2)
        zzz = zz[:, :, :, None] * z[:, None, None, :]
        sym = (
            eye[None, :, :, None] * z[:, None, None, :]
            + eye[None, :, None, :] * z[:, None, :, None]
            + eye[None, None, :, :] * z[:, :, None, None]
        )
        return g[:, None, None, None] * (-zzz / s2**3 + sym / s2**2)
    m = 0.5 * eta
    q = 1.0 + r2
    if k == 0:
        return q ** (-m)
    if k == 1:
        return (-2 * m * q ** (-m - 1) / s2)[:, None] * z
    zz = z[:, :, None] * z[:, None, :]
    if k == 2:
        return (4 * m * (m + 1) * q ** (-m - 2) / s2**2)[:, None, None] * zz - (
            2 * m * q ** (-m - 1) / s2
        )[:, None, None] * eye
    zzz = zz[:, :, :, None] * z[:, None, None, :]
    sym = (
        eye[None, :, :, None] * z[:, None, None, :]
        + eye[None, :, None, :] * z[:, None, :, None]
        + eye[None, None, :, :] * z[:, :, None, None]
    )
    return (-8 * m * (m + 1) * (m + 2) * q ** (-m - 3) / s2**3)[:, None, None, None] * zzz + (
        4 * m * (m + 1) * q ** (-m - 2) / s2**2
    )[:, None, None, None] * sym


class ModeField(FieldEval):
    """``x -> u g(x)`` for a scalar profile ``g`` of one of the kernel families."""

    def __init__(self, u, family, c, phase=0.0, sigma=1.0, eta=0.0):
        u = np.asarray(u, dtype=float)
        super().__init__(u.size, u.size, 3)
        self.u = u
        self.family = int(family)
        self.c = np.asarray(c, dtype=float)
        self.phase = float(phase)
        self.sigma = float(sigma)
        self.eta = float(eta)

    def _derivative(self, x, k):
        g = profile_jet(x, k, self.family, self.c, self.phase, self.sigma, self.eta)
        return np.multiply.outer(g, self.u).transpose((0, g.ndim) + tuple(range(1, g.ndim)))


class ModeBasis:
    """Basis fields ``e_1..e_l`` with weights ``lambda_k >= 0`` and envelope exponent ``eta``.

    Bases built by :meth:`trigonometric`, :meth:`gaussian` or :meth:`algebraic`
    carry a compact description used by the compiled RK4 kernel; bases from
    :meth:`from_fields` accept arbitrary :class:`FieldEval` objects.
    """

    def __init__(self, fields, weights=None, eta=0.0, family=None):
        fields = list(fields)
        if not fields:
            raise ConfigurationError("a mode basis needs at least one field")
        weights = np.ones(len(fields)) if weights is None else np.asarray(weights, dtype=float)
        if weights.shape != (len(fields),):
            raise ConfigurationError("one weight per field is required")
        if np.any(weights < 0):
            raise ConfigurationError("mode weights must be nonnegative")
        self.fields = fields
        self.weights = weights
        self.eta = float(eta)
        self.family = family
        self.dim = fields[0].dim

    @classmethod
    def from_fields(cls, fields, weights=None, eta=0.0):
        return cls(fields, weights, eta)

    @classmethod
    def _parametric(cls, family, U, C, phase, sigma, weights, eta):
        fields = [
            ModeField(U[k], family, C[k], phase[k], sigma[k], eta) for k in range(U.shape[0])
        ]
        return cls(fields, weights, eta, family)

    @classmethod
    def trigonometric(cls, dim, n_modes, weights=None, box=None, frequency=1.0, phases=None):
        """Shear modes ``e_k = u_k cos(<w_k, x> + phase_k)`` periodic on the box.

        Mode k oscillates along axis ``k mod d`` with harmonic ``1 + k // d``
        and points along the next axis (along the same axis when ``d = 1``).
        """
        box = _box(box, dim)
        width = box[:, 1] - box[:, 0]
        U = np.zeros((n_modes, dim))
        W = np.zeros((n_modes, dim))
        for k in range(n_modes):
            axis = k % dim
            W[k, axis] = 2 * np.pi * (1 + k // dim) * frequency / width[axis]
            U[k, (axis + 1) % dim] = 1.0
        phase = np.arange(n_modes) * np.pi / 3 if phases is None else np.asarray(phases, float)
        return cls._parametric(kernels.TRIG, U, W, phase, np.ones(n_modes), weights, 0.0)

    @classmethod
    def gaussian(cls, dim, n_modes, weights=None, box=None, width=None, centers=None):
        """Bumps ``e_k = u_k exp(-|x - c_k|^2 / 2 width^2)`` with Halton centres in the box."""
        box = _box(box, dim)
        C = _centers(box, n_modes) if centers is None else np.asarray(centers, float)
        sigma = np.full(n_modes, 0.5 * np.min(box[:, 1] - box[:, 0]) if width is None else width)
        U = np.eye(dim)[np.arange(n_modes) % dim]
        return cls._parametric(kernels.GAUSS, U, C, np.zeros(n_modes), sigma, weights, 0.0)

    @classmethod
    def algebraic(cls, dim, n_modes, eta=2.0, weights=None, box=None, width=None, centers=None):
        """Envelopes ``e_k = u_k (1 + |x - c_k|^2 / width^2)^(-eta / 2)``, decaying like ``|x|^-eta``."""
        if eta < 0:
            raise ConfigurationError("envelope exponent eta must be nonnegative")
        box = _box(box, dim)
        C = _centers(box, n_modes) if centers is None else np.asarray(centers, float)
        sigma = np.full(n_modes, 0.5 * np.min(box[:, 1] - box[:, 0]) if width is None else width)
        U = np.eye(dim)[np.arange(n_modes) % dim]
        return cls._parametric(kernels.ALGEBRAIC, U, C, np.zeros(n_modes), sigma, weights, eta)

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, k):
        return self.fields[k]

    def __iter__(self):
        return iter(self.fields)

    def kernel_params(self):
        """``(family, U, C, phase, sigma, eta)`` for :func:`kernels.compose_chain`, or None."""
        if self.family is None:
            return None
        f = self.fields
        return (
            self.family,
            np.array([e.u for e in f]),
            np.array([e.c for e in f]),
            np.array([e.phase for e in f]),
            np.array([e.sigma for e in f]),
            self.eta,
        )

    def concat(self, other):
        """Basis ``[self; other]``; stays kernel-compatible when both families agree."""
        family = self.family if self.family == other.family and self.eta == other.eta else None
        return ModeBasis(
            self.fields + list(other), np.concatenate([self.weights, other.weights]),
            self.eta, family,
        )


def _box(box, dim):
    box = np.tile([-1.0, 1.0], (dim, 1)) if box is None else np.asarray(box, float).reshape(-1, 2)
    if box.shape[0] != dim:
        raise ConfigurationError("box dimension does not match the field dimension")
    return box


def _centers(box, n):
    pts = qmc.Halton(box.shape[0], scramble=False).random(n + 1)[1:]
    return box[:, 0] + (box[:, 1] - box[:, 0]) * pts


def local_characteristic(basis, x, y):
    """``a(x, y) = sum_k lambda_k e_k(x) (x) e_k(y)``; shape (d, d) or (n, d, d)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    single = x.ndim == 1
    x, y = np.atleast_2d(x), np.atleast_2d(y)
    ex = np.stack([e(x) for e in basis])
    ey = np.stack([e(y) for e in basis])
    out = np.einsum("k,kni,knj->nij", basis.weights, ex, ey)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Brownian mode fields
# ---------------------------------------------------------------------------


class BrownianModeField:
    """Simulated ``M_t = sum_k B^k_t e_k`` on a uniform grid with cumulative Lévy areas."""

    def __init__(self, basis, times, B, seed=None, areas=None):
        self.basis = basis
        self.times = np.asarray(times, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.seed = seed
        self.path = GridPath(self.times, self.B, areas)
        self.areas = self.path.cumulative_areas

    @property
    def T(self):
        return float(self.times[-1])

    @property
    def n_steps(self):
        return self.times.size - 1

    def increments(self, s, t):
        return self.path.increments(s, t)

    def velocity(self, t):
        """``M_t`` as a field (``M_0 = 0``)."""
        return LinearCombination(self.basis, self.B[self.path.index(t)])

    def samples(self):
        return VelocityFieldSamples(self.times, self.basis, self.B)

    def to_csv(self, path):
        """Audit dump: one row per grid time with ``B^k`` and the upper triangle of ``A``."""
        ell = len(self.basis)
        iu = np.triu_indices(ell, k=1)
        header = ["t"] + [f"B{k}" for k in range(ell)] + [f"A{j}{k}" for j, k in zip(*iu)]
        with open(path, "w", newline="") as fh:
            fh.write("# schema: roughflows.brownian_field/1\n")
            w = csv.writer(fh)
            w.writerow(header)
            for i, t in enumerate(self.times):
                row = [t, *self.B[i], *self.areas[i][iu]]
                w.writerow([f"{v:.17g}" for v in row])


def simulate_brownian_field(basis, T, N_sim, seed, rng=None):
    """Brownian coefficients with variance ``lambda_k dt`` per step on ``N_sim`` equal steps.

    Areas are accumulated by the midpoint rule, which makes the area Chen
    relation exact on the grid.  ``rng`` (a numpy Generator) overrides ``seed``.
    """
    N_sim = int(N_sim)
    if N_sim < 2:
        raise ConfigurationError(f"N_sim must be at least 2, got {N_sim}")
    if T <= 0:
        raise ConfigurationError(f"T must be positive, got {T}")
    if np.any(basis.weights < 0):
        raise ConfigurationError("mode weights must be nonnegative")
    rng = np.random.default_rng(seed) if rng is None else rng
    dt = T / N_sim
    steps = rng.standard_normal((N_sim, len(basis))) * np.sqrt(basis.weights * dt)
    B = np.zeros((N_sim + 1, len(basis)))
    np.cumsum(steps, axis=0, out=B[1:])
    times = np.linspace(0.0, T, N_sim + 1)
    return BrownianModeField(basis, times, B, seed)


def mode_driver(field, params):
    """Natural lift of a Brownian mode field; queryable at grid times only."""
    return CoefficientDriver(field.basis, field.path, params)


# ---------------------------------------------------------------------------
# Piecewise-linear lifts
# ---------------------------------------------------------------------------


class VelocityFieldSamples:
    """A velocity field known at grid times.

    Either coefficients on a basis (``M_{t_i} = sum_k coeffs[i, k] e_k``) or,
    through :meth:`from_fields`, one arbitrary field per time.
    """

    def __init__(self, times, basis, coeffs):
        self.times = np.asarray(times, dtype=float)
        self.basis = basis
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (self.times.size, len(basis)):
            raise ConfigurationError("coeffs must have shape (len(times), len(basis))")
        self._per_time = None

    @classmethod
    def from_fields(cls, times, fields):
        """Samples from user fields; the lift then uses the increments as basis."""
        obj = cls.__new__(cls)
        obj.times = np.asarray(times, dtype=float)
        obj._per_time = list(fields)
        if len(obj._per_time) != obj.times.size:
            raise ConfigurationError("one field per time is required")
        obj.basis = None
        obj.coeffs = None
        return obj

    def field(self, i):
        if self._per_time is not None:
            return self._per_time[i]
        return LinearCombination(self.basis, self.coeffs[i])

    def indices(self, times):
        times = np.asarray(times, dtype=float)
        idx = np.clip(np.searchsorted(self.times, times - 1e-12), 0, self.times.size - 1)
        if np.any(np.abs(self.times[idx] - times) > 1e-9 * max(1.0, self.times[-1])):
            raise OffGridError("partition points must be sample times")
        return idx


def piecewise_linear_lift(samples, D, params):
    """Lift of the piecewise-linear interpolation of ``samples`` along partition ``D``.

    The interpolation is affine in time on each cell, so its iterated
    integrals are exact polygonal areas; the driver is queryable at any time.
    """
    knots = D.points if hasattr(D, "points") else np.asarray(D, dtype=float)
    idx = samples.indices(knots)
    if samples._per_time is None:
        path = PiecewiseLinearPath(knots, samples.coeffs[idx])
        return CoefficientDriver(samples.basis, path, params)
    # basis of per-cell increments, coefficient path running through unit vectors
    fields = [samples.field(i) for i in idx]
    deltas = [LinearCombination([b, a], [1.0, -1.0]) for a, b in zip(fields[:-1], fields[1:])]
    n = len(deltas)
    values = np.tril(np.ones((n + 1, n)), k=-1)
    driver = CoefficientDriver(deltas, PiecewiseLinearPath(knots, values), params)
    return driver


# ---------------------------------------------------------------------------
# Fine-step SDE cross-check
# ---------------------------------------------------------------------------


def _field_sum(basis, x, coeffs):
    return sum(c * e(x) for c, e in zip(coeffs, basis))


def stratonovich_heun(field, x0, stride=1):
    """Heun scheme for ``dx = sum_k e_k(x) o dB^k`` on the simulation grid.

    Returns the end points at time ``T``; ``stride`` > 1 uses every
    ``stride``-th grid point.
    """
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    kp = field.basis.kernel_params()
    B = field.B[::stride]
    zero = np.zeros((len(field.basis),) * 2)
    for m in range(B.shape[0] - 1):
        db = B[m + 1] - B[m]
        if kp is not None:
            f0 = kernels.mode_rhs_numpy(x, db, zero, *kp)
            f1 = kernels.mode_rhs_numpy(x + f0, db, zero, *kp)
        else:
            f0 = _field_sum(field.basis, x, db)
            f1 = _field_sum(field.basis, x + f0, db)
        x = x + 0.5 * (f0 + f1)
    return x
