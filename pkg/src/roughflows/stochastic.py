"""
Seeded randomness, empirical Kolmogorov diagnostics, Cameron-Martin paths,
the Schilder rate function and the Wong-Zakai experiment.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
import math

import numpy as np

from .core import (
    SpaceSample,
    TimeInterval,
    dyadic_partition,
    dyadic_time_pairs,
    loglog_slope,
)
from .driver import (
    CoefficientDriver,
    PiecewiseLinearPath,
    driver_dist,
    norm_table,
    pair_norms,
)
from .errors import BlowUpError, ConfigurationError
from .flow import DEFAULT_ODE, compose, solve_flow
from .lift import mode_driver, piecewise_linear_lift, simulate_brownian_field

INF = math.inf


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


class RngStreams:
    """Independent per-replicate generators derived from one master seed."""

    def __init__(self, master):
        self.master = int(master)

    def seed_sequence(self, i):
        return np.random.SeedSequence(self.master, spawn_key=(int(i),))

    def generator(self, i):
        return np.random.default_rng(self.seed_sequence(i))

    def seed(self, i):
        """A 64-bit integer seed for replicate ``i``."""
        return int(self.seed_sequence(i).generate_state(1, dtype=np.uint64)[0])


def run_replicates(func, n, workers=1):
    """``[func(i) for i in range(n)]``, optionally in worker processes, in index order."""
    if workers is None or workers <= 1 or n <= 1:
        return [func(i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(n)))


# ---------------------------------------------------------------------------
# Tail fits and Hölder statistics
# ---------------------------------------------------------------------------


@dataclass
class TailFit:
    """Fit of ``log P(X - median > t) ~ a - t^2 / c`` over the upper decile.

    ``c`` comes from regressing log survival on ``t^2``.  The verdict uses a
    weighted quadratic regression ``a + b t + q t^2`` of the same data
    (weights from the binomial variance of the empirical survival) and the
    ratio of its hazard rate ``-(b + 2 q t)`` at the right and left ends of the
    decile.  A Gaussian tail has hazard growing roughly like ``t``, an
    exponential tail a constant one; the tail is called Gaussian-compatible
    when the ratio is at least ``min_hazard_ratio``.  ``r2_gauss`` and
    ``r2_exp`` are the plain R^2 of log survival against ``t^2`` and ``t``.
    ``verdict`` is None when there are fewer than ``min_samples`` values or
    the sample is degenerate.
    """

    c: float
    r2_gauss: float
    r2_exp: float
    hazard_ratio: float
    verdict: object
    degenerate: bool
    n: int

    @classmethod
    def fit(cls, sample, min_samples=100, upper=0.9, min_hazard_ratio=1.25):
        x = np.sort(np.asarray(sample, dtype=float).ravel())
        n = x.size
        nan = float("nan")
        spread = np.ptp(x) if n else 0.0
        if n < 3 or spread <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
            return cls(nan, nan, nan, nan, None, True, n)
        shifted = x - np.median(x)
        surv = 1.0 - np.arange(1, n + 1) / (n + 1.0)
        start = int(np.floor(upper * n))
        keep = shifted[start:-1] > 0
        tail_t = shifted[start:-1][keep]
        tail_p = surv[start:-1][keep]
        if tail_t.size < 4 or np.ptp(tail_t) == 0:
            # too few tail points to fit anything; not a degenerate law
            return cls(nan, nan, nan, nan, None, False, n)
        tail_s = np.log(tail_p)
        r2_g, slope_g = _r2(tail_t**2, tail_s)
        r2_e, _ = _r2(tail_t, tail_s)
        c = -1.0 / slope_g if slope_g < 0 else float("inf")
        q, b, _ = np.polyfit(tail_t, tail_s, 2, w=np.sqrt(n * tail_p / (1.0 - tail_p)))
        h_lo, h_hi = -(b + 2 * q * tail_t[0]), -(b + 2 * q * tail_t[-1])
        ratio = float(h_hi / h_lo) if h_lo > 0 else (float("inf") if h_hi > 0 else 0.0)
        verdict = None if n < min_samples else bool(slope_g < 0 and ratio >= min_hazard_ratio)
        return cls(float(c), r2_g, r2_e, ratio, verdict, False, n)


def _r2(x, y):
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    tot = np.sum((y - y.mean()) ** 2)
    return (1.0 - float(np.sum(resid**2) / tot) if tot > 0 else 1.0), float(slope)


@dataclass
class HoelderStats:
    """Replicate-level sups of ``||V_ts||_{C^beta}/|t-s|^alpha`` and ``||W_ts||_{C^beta}/|t-s|^(2 alpha)``."""

    v_stats: np.ndarray
    w_stats: np.ndarray
    alpha: float
    beta: float
    replicates: int
    quantiles: dict = dc_field(default_factory=dict)


def _split_beta(beta):
    order = int(math.floor(beta))
    rho = beta - order
    if rho == 0:
        order, rho = order - 1, 1.0
    if order < 0:
        raise ConfigurationError("beta must be positive")
    return order, rho


def hoelder_statistic(drv, pairs, sample, alpha, beta):
    """``(sup_V, sup_W)`` for one driver over the given time pairs."""
    order, rho = _split_beta(beta)
    v, w = pair_norms(drv, None, pairs, sample, order, order, rho)
    h = pairs[:, 1] - pairs[:, 0]
    return float(np.max(v / h**alpha)), float(np.max(w / h ** (2 * alpha)))


class _DiagTask:
    def __init__(self, family, pairs, sample, alpha, beta):
        self.family, self.pairs, self.sample = family, pairs, sample
        self.alpha, self.beta = alpha, beta

    def __call__(self, i):
        return hoelder_statistic(self.family(i), self.pairs, self.sample, self.alpha, self.beta)


def kolmogorov_diagnostics(family, replicates, alpha, beta, sample, time_pairs=None,
                           T=1.0, workers=1, min_tail=100):
    """Empirical Hölder statistics of a driver family and a tail fit of the V-sups.

    ``family(i)`` returns the driver of replicate ``i``.  The tail verdict is
    withheld (None) below ``min_tail`` replicates.
    """
    pairs = dyadic_time_pairs(T, 6) if time_pairs is None else np.atleast_2d(time_pairs)
    out = run_replicates(_DiagTask(family, pairs, sample, alpha, beta), replicates, workers)
    v = np.array([o[0] for o in out])
    w = np.array([o[1] for o in out])
    q = {f"v_q{int(100 * k)}": float(np.quantile(v, k)) for k in (0.5, 0.9, 0.99)}
    q.update({f"w_q{int(100 * k)}": float(np.quantile(w, k)) for k in (0.5, 0.9, 0.99)})
    stats = HoelderStats(v, w, alpha, beta, replicates, q)
    return stats, TailFit.fit(v, min_samples=min_tail)


# ---------------------------------------------------------------------------
# Cameron-Martin paths
# ---------------------------------------------------------------------------


class CameronMartinPath:
    """``h_t = int_0^t hdot`` with ``hdot`` constant on grid cells, in mode coordinates.

    The inner product is ``sum_cells dt sum_k hdot1^k hdot2^k / lambda_k``;
    with unit weights this is ``sum |hdot|^2 dt``.
    """

    def __init__(self, times, hdot, weights=None):
        self.times = np.asarray(times, dtype=float)
        hdot = np.asarray(hdot, dtype=float)
        if hdot.ndim == 1:
            hdot = hdot[:, None]
        if hdot.shape[0] != self.times.size - 1:
            raise ConfigurationError("hdot needs one row per grid cell")
        self.hdot = hdot
        self.weights = np.ones(hdot.shape[1]) if weights is None else np.asarray(weights, float)
        self.dt = np.diff(self.times)

    @classmethod
    def constant(cls, c, T=1.0, n_cells=1, weights=None):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(np.linspace(0.0, T, n_cells + 1), np.tile(c, (n_cells, 1)), weights)

    @property
    def dim(self):
        return self.hdot.shape[1]

    @property
    def T(self):
        return float(self.times[-1])

    def values(self):
        """``h`` at grid times, shape (N+1, l)."""
        out = np.zeros((self.times.size, self.dim))
        np.cumsum(self.hdot * self.dt[:, None], axis=0, out=out[1:])
        return out

    def at(self, t):
        t = np.asarray(t, dtype=float)
        vals = self.values()
        return np.stack([np.interp(t, self.times, vals[:, k]) for k in range(self.dim)], axis=-1)


def _inv_weights(w):
    with np.errstate(divide="ignore"):
        return np.where(w > 0, 1.0 / np.where(w > 0, w, 1.0), INF)


def cm_inner(h1, h2):
    """``<h1, h2>_H``; infinite when a zero-weight mode carries energy."""
    if h1.times.shape != h2.times.shape or not np.allclose(h1.times, h2.times, rtol=0, atol=1e-12):
        raise ConfigurationError("Cameron-Martin paths live on different grids")
    if h1.dim != h2.dim or not np.array_equal(h1.weights, h2.weights):
        raise ConfigurationError("Cameron-Martin paths have different mode spaces")
    prod = h1.hdot * h2.hdot * h1.dt[:, None]
    inv = _inv_weights(h1.weights)
    total = 0.0
    for k in range(h1.dim):
        col = prod[:, k]
        if np.isinf(inv[k]):
            if np.any(col != 0):
                return INF
            continue
        total += float(np.sum(col)) * inv[k]
    return total


def _functionals(basis, sample, norm):
    """Rows of linear functionals (per term) realising the chosen sample norm."""
    if norm == "c0":
        vals = np.stack([e(sample.points) for e in basis])  # (l, n, q)
        return [vals.reshape(len(basis), -1)]
    order, rho = norm
    table = norm_table(basis, sample, rho, order, 0)
    return table._v_sup + table._v_hol


def sigma_gamma(basis, sample, norm="c0", n_draws=1000, seed=0):
    """``sigma_gamma`` for the Gaussian field ``sum_k sqrt(lambda_k) xi_k e_k``.

    Monte Carlo estimate of ``sqrt(E ||X||^2)`` over ``n_draws`` draws, floored
    at the exact embedding constant of the finite-mode Cameron-Martin space
    for the same sample norm so that the Cameron-Martin bounds hold exactly.
    ``norm`` is ``"c0"`` or ``(order, rho)`` for the ``C^{order+rho}`` norm.
    Returns ``(sigma, sigma_mc, sigma_exact)``.
    """
    terms = _functionals(basis, sample, norm)
    lam = basis.weights
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_draws, len(basis))) * np.sqrt(lam)
    sq = sum(np.max(np.abs(xi @ t), axis=1) for t in terms)
    sigma_mc = float(np.sqrt(np.mean(sq**2)))
    sigma_exact = float(sum(np.max(np.sqrt(lam @ (t * t))) for t in terms))
    return max(sigma_mc, sigma_exact), sigma_mc, sigma_exact


def _field_norm(basis, sample, coeffs, norm="c0"):
    terms = _functionals(basis, sample, norm)
    coeffs = np.atleast_2d(coeffs)
    return sum(np.max(np.abs(coeffs @ t), axis=1) for t in terms)


@dataclass
class CMBoundsReport:
    increment: float
    variation: float
    bound: float
    slack_increment: float
    slack_variation: float
    ok: bool


def cm_bounds_check(h, s, t, basis, sample, sigma=None, norm="c0"):
    """Check ``||h_t - h_s|| <= sigma |t-s|^(1/2) sqrt(<h,h>)`` and the 1-variation bound.

    Norms of ``h`` values are sample norms of ``sum_k h^k e_k``.  For a path
    that is linear on grid cells the 1-variation over ``[s, t]`` is attained
    on the grid.
    """
    if sigma is None:
        sigma = sigma_gamma(basis, sample, norm)[0]
    i, j = np.searchsorted(h.times, [s - 1e-12, t - 1e-12])
    vals = h.values()
    inc = float(_field_norm(basis, sample, vals[j] - vals[i], norm)[0])
    var = float(np.sum(_field_norm(basis, sample, np.diff(vals[i:j + 1], axis=0), norm))) if j > i else 0.0
    bound = sigma * math.sqrt(t - s) * math.sqrt(cm_inner(h, h))
    return CMBoundsReport(inc, var, bound, bound - inc, bound - var,
                          bool(inc <= bound * (1 + 1e-12) and var <= bound * (1 + 1e-12)))


def smooth_lift(h, basis, params):
    """Driver of ``h`` through the basis; exact polygonal areas since ``h`` is piecewise linear."""
    return CoefficientDriver(basis, PiecewiseLinearPath(h.times, h.values()), params)


@dataclass
class SmoothLiftBounds:
    v_rate: float
    w_rate: float
    sigma: float
    energy: float
    C: float
    v_slack: float
    w_slack: float
    ok: bool


def smooth_lift_bounds(h, basis, sample, rho, pairs=None, sigma=None, params=None):
    """Rates ``sup ||h_ts||_{C^{2+rho}}/|t-s|^(1/2)`` and ``sup ||w_ts||_{C^{1+rho}}/|t-s|``.

    The constant ``C`` in the W bound is
    ``sum_{j<k} sqrt(lambda_j lambda_k) ||(e_j.e_k) - (e_k.e_j)||_{C^{1+rho}} / sigma^2``,
    which follows from ``|A^{jk}_ts| <= ||hdot^j||_{L^1} ||hdot^k||_{L^1}`` on ``[s, t]``.
    """
    from .core import DriverParams

    params = DriverParams(2.5, max(rho, 0.51)) if params is None else params
    drv = smooth_lift(h, basis, params)
    if sigma is None:
        sigma = sigma_gamma(basis, sample, (2, rho))[0]
    if pairs is None:
        pairs = np.stack(np.triu_indices(h.times.size, k=1), axis=1)
        pairs = h.times[pairs]
    v, w = pair_norms(drv, None, pairs, sample, 2, 1, rho)
    dt = pairs[:, 1] - pairs[:, 0]
    v_rate = float(np.max(v / np.sqrt(dt)))
    w_rate = float(np.max(w / dt))
    energy = cm_inner(h, h)
    ell = len(basis)
    table = norm_table(basis, sample, rho, 2, 1)
    lam = basis.weights
    total = 0.0
    for j in range(ell):
        for k in range(j + 1, ell):
            a = np.zeros((ell, ell))
            a[j, k], a[k, j] = 1.0, -1.0
            total += math.sqrt(lam[j] * lam[k]) * float(table.w_norms(a))
    C = total / sigma**2 if sigma > 0 else 0.0
    v_bound = sigma * math.sqrt(energy)
    w_bound = C * sigma**2 * energy
    tol = 1e-12
    ok = v_rate <= v_bound * (1 + tol) + tol and w_rate <= w_bound * (1 + tol) + tol
    return SmoothLiftBounds(v_rate, w_rate, sigma, energy, C, v_bound - v_rate,
                            w_bound - w_rate, bool(ok))


def random_cm_path(rng, ell, T=1.0, n_cells=16, weights=None, scale=1.0):
    return CameronMartinPath(
        np.linspace(0.0, T, n_cells + 1), scale * rng.standard_normal((n_cells, ell)), weights
    )


def _energy_profile(times, values, weights, levels=6):
    """Discrete energies ``sum |dh|^2 / (lambda dt)`` on dyadic coarsenings of the grid."""
    inv = _inv_weights(weights)
    n = times.size - 1
    out, counts = [], []
    for j in range(levels, -1, -1):
        step = 2**j
        if step > n or n % step:
            continue
        t, v = times[::step], values[::step]
        d = np.diff(v, axis=0)
        dt = np.diff(t)[:, None]
        with np.errstate(invalid="ignore"):
            per = np.where(d != 0, d * d / dt * inv, 0.0)
        out.append(float(np.sum(per)))
        counts.append(t.size - 1)
    return np.array(counts), np.array(out)


def rate_function(v, basis=None, growth_slope=0.5, sample=None, tol=1e-8):
    """Schilder rate ``1/2 <v, v>_H`` or ``inf``.

    ``v`` is a :class:`CameronMartinPath` or a coefficient driver.  For a
    driver on a piecewise-linear path the energy on its knots is exact.  For
    other drivers the first-level coefficients on the stored grid are tested
    by refinement: when the discrete energy keeps growing under grid
    refinement (log-log slope above ``growth_slope``) the path has no square
    integrable derivative and the rate is infinite.  A driver on a different
    basis is projected onto ``basis`` by least squares on ``sample``; a
    projection residual above ``tol`` gives ``inf``.  Coefficients of basis
    fields that vanish on ``sample`` are ignored.
    """
    if isinstance(v, CameronMartinPath):
        return 0.5 * cm_inner(v, v)
    if not isinstance(v, CoefficientDriver):
        raise ConfigurationError("rate_function needs a CameronMartinPath or a coefficient driver")
    path = v.path
    times = getattr(path, "knots", None)
    if times is None:
        times = path.grid if path.grid is not None else np.linspace(0.0, v.T, 2**10 + 1)
    coeffs = path.values(times)
    weights = v.basis.weights if hasattr(v.basis, "weights") else np.ones(len(v.basis))
    if sample is None:
        sample = SpaceSample.quasi_random(np.tile([-1.0, 1.0], (v.dim, 1)), 128, 8)
    # modes whose field vanishes move nothing and carry no energy
    null = np.array([not np.any(e(sample.points)) for e in v.basis])
    coeffs = np.where(null, 0.0, coeffs)
    if basis is not None and basis is not v.basis:
        own = np.stack([e(sample.points).ravel() for e in v.basis], axis=1)
        target = np.stack([e(sample.points).ravel() for e in basis], axis=1)
        proj, *_ = np.linalg.lstsq(target, own, rcond=None)
        resid = float(np.max(np.abs(target @ proj - own))) * float(np.max(np.abs(coeffs)) + 1)
        if resid > tol:
            return INF
        coeffs = coeffs @ proj.T
        weights = basis.weights
    counts, energies = _energy_profile(times, coeffs, weights)
    if np.any(np.isinf(energies)):
        return INF
    # a piecewise-linear path is exact between its knots; only sampled paths need the sweep
    exact = isinstance(path, PiecewiseLinearPath)
    if not exact and counts.size >= 3 and energies[-1] > 0:
        fine = slice(-3, None)
        if loglog_slope(counts[fine], energies[fine]) > growth_slope:
            return INF
    return 0.5 * float(energies[-1]) if energies.size else 0.0


# ---------------------------------------------------------------------------
# Wong-Zakai
# ---------------------------------------------------------------------------


@dataclass
class WongZakaiRow:
    level: int
    mesh: float
    median_dV: float
    median_dW: float
    median_homog: float
    median_flow_dist: float
    n_fail: int


@dataclass
class WongZakaiResult:
    rows: list
    per_replicate: np.ndarray  # (replicates, levels, 4): dV, dW, homog, flow
    homog_slope: float
    flow_slope: float
    rank_correlation: float


class _WZTask:
    def __init__(self, basis, T, levels, params, streams, n_sim, sample, pairs, cfg, tol_flow):
        self.basis, self.T, self.levels, self.params = basis, T, levels, params
        self.streams, self.n_sim, self.sample, self.pairs = streams, n_sim, sample, pairs
        self.cfg, self.tol_flow = cfg, tol_flow

    def __call__(self, i):
        field = simulate_brownian_field(self.basis, self.T, self.n_sim, None,
                                        rng=self.streams.generator(i))
        drv = mode_driver(field, self.params)
        samples = field.samples()
        interval = TimeInterval(0.0, self.T, self.T)
        x = self.sample.points
        try:
            flow = solve_flow(drv, interval, self.cfg, self.tol_flow,
                              K_max=int(round(math.log2(self.n_sim))), sample=self.sample)
            # the reference only needs to be far more accurate than the distances
            # being measured, so a small residual past tol_flow is tolerated
            rep = flow.report
            ok = rep.converged or (rep.deltas and rep.deltas[-1] <= 100 * self.tol_flow)
            rough = flow(x) if ok else None
        except BlowUpError:
            rough = None
        out = np.full((len(self.levels), 4), np.nan)
        for r, level in enumerate(self.levels):
            D = dyadic_partition(interval, level)
            pl = piecewise_linear_lift(samples, D, self.params)
            _, dv, dw = driver_dist(drv, pl, self.pairs, self.sample, parts=True)
            out[r, :3] = dv, dw, max(dv, math.sqrt(dw))
            if rough is not None:
                try:
                    ode = compose(pl, D.points, x, self.cfg)
                    out[r, 3] = float(np.max(np.abs(ode - rough)))
                except BlowUpError:
                    pass
        return out


def _spearman(a, b):
    keep = np.isfinite(a) & np.isfinite(b)
    if keep.sum() < 3:
        return float("nan")
    ra = np.argsort(np.argsort(a[keep])).astype(float)
    rb = np.argsort(np.argsort(b[keep])).astype(float)
    return float(np.corrcoef(ra, rb)[0, 1])


def wong_zakai_experiment(basis, T, levels, replicates, params, seed=0, n_sim=None,
                          sample=None, time_pairs=None, cfg=DEFAULT_ODE, tol_flow=1e-6,
                          workers=1):
    """Distances between the natural lift and its piecewise-linear approximations.

    For each mesh level the table holds medians over replicates of the V and W
    parts of the inhomogeneous distance, of the homogeneous distance, and of
    the sup distance between the rough flow and the ODE flow driven by the
    interpolated field.  Replicates whose rough flow blew up or whose last
    level difference exceeds ``100 tol_flow`` are excluded from the flow
    column and counted in ``n_fail``.
    """
    levels = [int(k) for k in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigurationError("levels must be increasing")
    n_sim = 2 ** max(levels[-1] + 2, 12) if n_sim is None else int(n_sim)
    if n_sim < 2 ** levels[-1] or n_sim % 2 ** levels[-1]:
        raise ConfigurationError("the simulation grid must refine the finest partition")
    if sample is None:
        sample = SpaceSample.quasi_random(np.tile([-1.0, 1.0], (basis.dim, 1)), 64, 128, seed=0)
    pairs = dyadic_time_pairs(T, 6) if time_pairs is None else np.atleast_2d(time_pairs)
    task = _WZTask(basis, T, levels, params, RngStreams(seed), n_sim, sample, pairs, cfg, tol_flow)
    per = np.stack(run_replicates(task, replicates, workers))
    rows = []
    for r, level in enumerate(levels):
        col = per[:, r]
        flows = col[:, 3]
        ok = np.isfinite(flows)
        rows.append(WongZakaiRow(
            level, T / 2**level, float(np.median(col[:, 0])), float(np.median(col[:, 1])),
            float(np.median(col[:, 2])),
            float(np.median(flows[ok])) if ok.any() else float("nan"),
            int((~ok).sum()),
        ))
    meshes = np.array([row.mesh for row in rows])
    homog = np.array([row.median_homog for row in rows])
    flows = np.array([row.median_flow_dist for row in rows])
    return WongZakaiResult(
        rows, per, loglog_slope(meshes, homog), loglog_slope(meshes, flows),
        _spearman(per[:, :, 2].ravel(), per[:, :, 3].ravel()),
    )
