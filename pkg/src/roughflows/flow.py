"""
Approximate flows ``mu_ts`` (time-1 maps of ``y' = V_ts(y) + W_ts(y)``), their
dyadic compositions and the solution flow they converge to.
"""
from dataclasses import dataclass, field as dc_field
import warnings

import numpy as np

from .core import (
    LinearCombination,
    SpaceSample,
    TimeInterval,
    dyadic_partition,
    hoelder_quotient,
    loglog_slope,
)
from .driver import (
    CoefficientDriver,
    GridPath,
    apply_field,
    chen_defect,
    dilate,
    second_level_apply,
    time_reverse,
)
from .errors import BlowUpError, ChenViolationError, ConfigurationError, OffGridError
from . import kernels


@dataclass(frozen=True)
class ODEConfig:
    """RK4 settings for one time-1 map.

    ``guard`` is the sup-norm radius past which a trajectory is declared blown
    up; :meth:`for_box` sets it to 1e3 times the box diameter.
    """

    n_sub: int = 8
    drift: object = None
    guard: float = np.inf

    def __post_init__(self):
        if int(self.n_sub) < 1:
            raise ConfigurationError(f"n_sub must be >= 1, got {self.n_sub}")

    @classmethod
    def for_box(cls, box, n_sub=8, drift=None):
        box = np.asarray(box, dtype=float).reshape(-1, 2)
        return cls(n_sub, drift, 1e3 * float(np.linalg.norm(box[:, 1] - box[:, 0])))


DEFAULT_ODE = ODEConfig()


def _rk4(rhs, x, n_sub):
    h = 1.0 / n_sub
    for _ in range(n_sub):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def _coefficient_rhs(fields, b, area, drift=None, dt=0.0):
    """``sum_k b_k e_k + sum_k (De_k) u_k`` with ``u_k = sum_j A^{jk} e_j``, plus drift."""
    active = [k for k in range(len(fields)) if b[k] != 0 or np.any(area[k]) or np.any(area[:, k])]
    fields = [fields[k] for k in active]
    b = b[active]
    area = area[np.ix_(active, active)]
    has_area = bool(np.any(area))

    def rhs(x):
        out = np.zeros_like(x) if drift is None else dt * drift(x)
        if not fields:
            return out
        E = np.stack([e.derivative(x, 0) for e in fields])
        out = out + np.einsum("k,kni->ni", b, E)
        if has_area:
            DE = np.stack([e.derivative(x, 1) for e in fields])
            U = np.einsum("jk,jna->kna", area, E)
            out = out + np.einsum("knia,kna->ni", DE, U)
        return out

    return rhs


def compose(drv, times, x, cfg=DEFAULT_ODE, raise_on_blowup=True):
    """``mu_{t_n t_{n-1}} o ... o mu_{t_1 t_0}`` applied to points ``x``."""
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if times.size < 2:
        return x.copy()
    kp = drv.basis.kernel_params() if isinstance(drv, CoefficientDriver) and hasattr(
        drv.basis, "kernel_params") else None
    if kp is not None and cfg.drift is None:
        b, a = drv.coefficients(times[:-1], times[1:])
        out, blown = kernels.compose_chain(pts, b, a, *kp, n_sub=cfg.n_sub, guard=cfg.guard)
    else:
        out = pts.copy()
        coefficient = isinstance(drv, CoefficientDriver)
        if coefficient:
            fields = list(drv.basis)
            b_all, a_all = drv.coefficients(times[:-1], times[1:])
        with np.errstate(over="ignore", invalid="ignore"):
            for i, (s, t) in enumerate(zip(times[:-1], times[1:])):
                if coefficient:
                    F = _coefficient_rhs(fields, b_all[i], a_all[i], cfg.drift, t - s)
                else:
                    V, W = drv.vector_fields(s, t)
                    parts = [V, W] if cfg.drift is None else [V, W, cfg.drift]
                    coef = [1.0, 1.0] if cfg.drift is None else [1.0, 1.0, t - s]
                    F = LinearCombination(parts, coef)
                out = _rk4(F, out, cfg.n_sub)
                bad = ~np.all(np.isfinite(out), axis=1) | (np.max(np.abs(out), axis=1) > cfg.guard)
                out[bad] = np.nan
        blown = np.isnan(out).any(axis=1)
    if raise_on_blowup and blown.any():
        raise BlowUpError(f"{int(blown.sum())} trajectories left the guard region")
    return out[0] if single else out


def mu(drv, s, t, x, cfg=DEFAULT_ODE):
    """Time-1 map of the frozen field ``V_ts + W_ts`` (+ ``(t - s)`` drift)."""
    if s > t:
        raise ConfigurationError("need s <= t")
    return compose(drv, [s, t], x, cfg)


def _points(sample):
    return sample.points if hasattr(sample, "points") else np.atleast_2d(sample)


def euler_defect(drv, s, t, f, sample, cfg=DEFAULT_ODE):
    """``sup |f(mu_ts x) - f(x) - (V_ts f)(x) - (VV_ts f)(x)|`` over the sample."""
    x = _points(sample)
    y = mu(drv, s, t, x, cfg)
    V = drv.V(s, t)
    expansion = f(x)[:, 0] + apply_field(V, f, x) + second_level_apply(drv, s, t, f, x)
    return float(np.max(np.abs(f(y)[:, 0] - expansion)))


def euler_defect_profile(drv, levels, f, sample, cfg=DEFAULT_ODE, max_cells=64, t0=0.0):
    """Mean euler_defect over dyadic cells of length ``T 2^-k`` and its log-log slope.

    For each level at most ``max_cells`` evenly spread cells are used.  A
    single cell per scale gives a very noisy slope for random drivers;
    averaging over cells estimates the same power law.

    Returns ``(meshes, defects, slope)``.
    """
    span = drv.T - t0
    meshes, defects = [], []
    for k in levels:
        n = 2**k
        h = span / n
        idx = np.unique(np.linspace(0, n - 1, min(n, max_cells)).round().astype(int))
        vals = [euler_defect(drv, t0 + i * h, t0 + (i + 1) * h, f, sample, cfg) for i in idx]
        meshes.append(h)
        defects.append(float(np.mean(vals)))
    return meshes, defects, loglog_slope(meshes, defects)


# ---------------------------------------------------------------------------
# Solution flows
# ---------------------------------------------------------------------------


@dataclass
class FlowSolveReport:
    """Per-level differences ``deltas[k] = sup |phi^(k+1) - phi^(k)|`` and their fit.

    ``rate`` is the fitted exponent r in ``delta_k ~ c1 * mesh_k**r``;
    ``theoretical_rate`` is ``3 rho / p - 1``.
    """

    levels: list
    deltas: list
    rate: float
    c1: float
    converged: bool
    final_level: int
    theoretical_rate: float
    a: float
    tol_flow: float
    n_blown: int = 0
    notes: list = dc_field(default_factory=list)


def fit_level_rate(deltas, meshes, burn_in=2):
    """Fit ``delta ~ c1 * mesh**r`` over the levels past ``burn_in``; returns ``(r, c1)``."""
    deltas = np.asarray(deltas, dtype=float)
    meshes = np.asarray(meshes, dtype=float)
    if deltas.size - burn_in >= 3:
        deltas, meshes = deltas[burn_in:], meshes[burn_in:]
    keep = (deltas > 0) & np.isfinite(deltas)
    if keep.sum() < 2:
        return float("nan"), float("nan")
    r, logc = np.polyfit(np.log(meshes[keep]), np.log(deltas[keep]), 1)
    return float(r), float(np.exp(logc))


class Flow:
    """Solution flow evaluated by composing ``mu`` over the final dyadic partition."""

    def __init__(self, drv, interval, partition, cfg, report, params):
        self.driver = drv
        self.interval = interval
        self.partition = partition
        self.cfg = cfg
        self.report = report
        self.params = params

    def times_between(self, s, t):
        pts = self.partition.points
        tol = 1e-12 * max(1.0, self.interval.t)
        if s > t + tol or s < pts[0] - tol or t > pts[-1] + tol:
            raise ConfigurationError(f"({s}, {t}) outside the solved interval")
        inner = pts[(pts > s + tol) & (pts < t - tol)]
        if self.driver.grid is not None:
            on = np.min(np.abs(pts - s)) <= tol and np.min(np.abs(pts - t)) <= tol
            if not on:
                raise OffGridError("flow of a grid driver is queryable at partition times only")
        if abs(t - s) <= tol:
            return np.array([s])
        return np.concatenate([[s], inner, [t]])

    def evaluate(self, s, t, x):
        """``phi_ts(x)``; the identity when ``s == t``."""
        return compose(self.driver, self.times_between(s, t), x, self.cfg)

    def __call__(self, x):
        return self.evaluate(self.interval.s, self.interval.t, x)


def max_grid_level(drv, interval, K_max):
    """Largest level ``<= K_max`` whose dyadic points are all queryable."""
    if drv.grid is None:
        return K_max
    for k in range(K_max, -1, -1):
        pts = dyadic_partition(interval, k).points
        g = drv.grid
        idx = np.clip(np.searchsorted(g, pts - 1e-9), 0, g.size - 1)
        if np.all(np.abs(g[idx] - pts) <= 1e-9 * max(1.0, interval.t)):
            return k
    raise OffGridError("interval endpoints are not on the driver grid")


def solve_flow(drv, interval=None, cfg=DEFAULT_ODE, tol_flow=1e-6, K_max=12, sample=None,
               K_min=2, allow_ill_posed=False):
    """Compose ``mu`` over dyadic partitions of level 0, 1, ... until ``delta_k <= tol_flow``.

    Non-convergence by ``K_max`` (or by the finest level the driver grid
    allows) is reported through ``report.converged``, not raised.
    """
    params = drv.params
    if not params.well_posed:
        if not allow_ill_posed:
            raise ConfigurationError(
                f"rho = {params.rho} <= p/3 = {params.p / 3:.4f}; pass allow_ill_posed=True"
            )
        warnings.warn("rho <= p/3: convergence of the composition is not guaranteed")
    interval = TimeInterval(0.0, drv.T, drv.T) if interval is None else interval
    if sample is None:
        sample = SpaceSample.quasi_random(np.tile([-1.0, 1.0], (drv.dim, 1)), 64, 16, seed=0)
    x = _points(sample)
    top = max_grid_level(drv, interval, K_max)
    notes = []
    if top < K_max:
        notes.append(f"driver grid limits the solver to level {top}")
    prev = compose(drv, dyadic_partition(interval, 0).points, x, cfg)
    deltas, levels, meshes = [], [], []
    converged = False
    final = 0
    for k in range(1, top + 1):
        part = dyadic_partition(interval, k)
        cur = compose(drv, part.points, x, cfg)
        deltas.append(float(np.max(np.abs(cur - prev))))
        levels.append(k - 1)
        meshes.append(interval.length / 2 ** (k - 1))
        prev = cur
        final = k
        if k >= K_min and deltas[-1] <= tol_flow:
            converged = True
            break
    rate, c1 = fit_level_rate(deltas, meshes)
    report = FlowSolveReport(
        levels, deltas, rate, c1, converged, final, params.theoretical_rate, params.a,
        tol_flow, 0, notes,
    )
    return Flow(drv, interval, dyadic_partition(interval, final), cfg, report, params)


def inverse_flow(drv, interval=None, cfg=DEFAULT_ODE, tol_flow=1e-6, K_max=12, sample=None,
                 forward=None, **kwargs):
    """Flow ``psi`` of the driver reversed from ``interval.t``, so that ``psi o phi_ts = Id``.

    The returned flow runs over ``[0, t - s]`` of the reversed driver.  When a
    forward flow is given (or solved here) the attributes ``defect_left``
    (``sup |psi(phi(x)) - x|``) and ``defect_right`` are filled in.
    """
    interval = TimeInterval(0.0, drv.T, drv.T) if interval is None else interval
    a = interval.t
    rev = time_reverse(drv, a)
    rinterval = TimeInterval(0.0, a - interval.s, a)
    psi = solve_flow(rev, rinterval, cfg, tol_flow, K_max, sample, **kwargs)
    if forward is None:
        forward = solve_flow(drv, interval, cfg, tol_flow, K_max, sample, **kwargs)
    x = _points(sample) if sample is not None else np.zeros((1, drv.dim))
    psi.forward = forward
    psi.defect_left = float(np.max(np.abs(psi(forward(x)) - x)))
    psi.defect_right = float(np.max(np.abs(forward(psi(x)) - x)))
    return psi


def flow_property_defect(flow, s, u, t, sample):
    """``sup |phi_tu(phi_us(x)) - phi_ts(x)|`` over the sample."""
    x = _points(sample)
    lhs = flow.evaluate(u, t, flow.evaluate(s, u, x))
    return float(np.max(np.abs(lhs - flow.evaluate(s, t, x))))


def flow_mu_distance(flow, pairs, sample):
    """``sup_x |phi_ts(x) - mu_ts(x)|`` for each time pair (partition times)."""
    x = _points(sample)
    out = []
    for s, t in np.atleast_2d(pairs):
        out.append(float(np.max(np.abs(flow.evaluate(s, t, x) - mu(flow.driver, s, t, x, flow.cfg)))))
    return np.array(out)


def flow_hoelder_norm(flow, s, t, sample, rho):
    """Sample ``C^rho`` estimate of ``phi_ts``: sup plus Hölder quotient."""
    vals = flow.evaluate(s, t, _points(sample))

    def phi(y):
        return flow.evaluate(s, t, y)

    return float(np.max(np.abs(vals))) + hoelder_quotient(phi, sample, rho)


# ---------------------------------------------------------------------------
# Driver sums and continuity
# ---------------------------------------------------------------------------


def add_drivers(d1, d2, check=True):
    """Driver of ``V1 + V2`` with the joint second level of the coefficient paths.

    The joint path runs on the grid of the grid-restricted summand (or on the
    finest stored grid); cross areas are Riemann-Stieltjes (polygonal) sums
    on that grid, own areas are kept exactly.  Meant for a stochastic driver
    plus a deterministic smooth one.
    """
    if not (isinstance(d1, CoefficientDriver) and isinstance(d2, CoefficientDriver)):
        raise ConfigurationError("driver sums need coefficient drivers")
    if d1.params != d2.params or abs(d1.T - d2.T) > 1e-12 * max(1.0, d1.T):
        raise ConfigurationError("summands must share parameters and horizon")
    if d1.grid is None and d2.grid is None:
        grid = np.linspace(0.0, d1.T, 2**12 + 1)
    elif d1.grid is None or (d2.grid is not None and d2.grid.size > d1.grid.size):
        grid = d2.grid
    else:
        grid = d1.grid
    zeros = np.zeros_like(grid)
    b1, a1 = d1.coefficients(zeros, grid)
    b2, a2 = d2.coefficients(zeros, grid)
    joint = np.concatenate([b1, b2], axis=1)
    areas = kernels.levy_area_cumulative(joint)
    l1 = b1.shape[1]
    areas[:, :l1, :l1] = a1
    areas[:, l1:, l1:] = a2
    path = GridPath(grid, joint, areas, deterministic=d1.path.deterministic and d2.path.deterministic)
    if hasattr(d1.basis, "concat") and hasattr(d2.basis, "concat"):
        basis = d1.basis.concat(d2.basis)
    else:
        basis = list(d1.basis) + list(d2.basis)
    out = CoefficientDriver(basis, path, d1.params)
    if check:
        probe = SpaceSample.from_points(np.zeros((1, out.dim)), pairs=np.zeros((0, 2, out.dim)))
        m = grid.size - 1
        defect = chen_defect(out, grid[0], grid[m // 3], grid[m], probe)
        if defect > 1e-7 * max(1.0, float(np.max(np.abs(areas)))):
            raise ChenViolationError(f"driver sum violates Chen (defect {defect:.3g})")
    return out


@dataclass(frozen=True)
class ContinuityRow:
    eps: float
    distance: float


def flow_continuity_probe(drv, perturbation, eps_values, interval=None, sample=None,
                          cfg=DEFAULT_ODE, level=None):
    """``sup_x |phi^eps(x) - phi(x)|`` for drivers ``drv + dilate(perturbation, eps)``.

    All flows are evaluated by composition at the same dyadic level so that
    ``eps = 0`` gives exactly zero.
    """
    interval = TimeInterval(0.0, drv.T, drv.T) if interval is None else interval
    x = _points(sample) if sample is not None else np.zeros((1, drv.dim))
    if level is None:
        level = min(10, max_grid_level(drv, interval, 10))
    times = dyadic_partition(interval, level).points
    base = compose(drv, times, x, cfg)
    rows = []
    for eps in eps_values:
        if eps == 0:
            rows.append(ContinuityRow(0.0, 0.0))
            continue
        pert = add_drivers(drv, dilate(perturbation, eps))
        moved = compose(pert, times, x, cfg)
        rows.append(ContinuityRow(float(eps), float(np.max(np.abs(moved - base)))))
    return rows
