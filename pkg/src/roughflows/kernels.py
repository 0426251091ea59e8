"""
Hot loops: RK4 time-1 maps composed over many cells for mode-basis drivers,
and cumulative Lévy areas.

Every kernel has a numba version and a pure-numpy version with the same
signature; :data:`roughflows._accel.USE_NUMBA` picks one at import time.

Mode families (``family`` code): 0 trigonometric ``cos(<w, x> + phase)``,
1 Gaussian bump ``exp(-|x - c|^2 / 2 sigma^2)``, 2 algebraic envelope
``(1 + |x - c|^2 / sigma^2)^(-eta / 2)``.  Field k is ``U[k] * g_k(x)``.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

TRIG, GAUSS, ALGEBRAIC = 0, 1, 2


# ---------------------------------------------------------------------------
# Lévy areas
# ---------------------------------------------------------------------------


def _levy_area_numpy(x):
    dx = np.diff(x, axis=0)
    left = x[:-1]
    step = 0.5 * (left[:, :, None] * dx[:, None, :] - dx[:, :, None] * left[:, None, :])
    out = np.zeros((x.shape[0], x.shape[1], x.shape[1]))
    np.cumsum(step, axis=0, out=out[1:])
    return out


@njit(cache=True)
def _levy_area_numba(x):
    n, ell = x.shape
    out = np.zeros((n, ell, ell))
    for m in range(n - 1):
        for j in range(ell):
            dj = x[m + 1, j] - x[m, j]
            for k in range(ell):
                dk = x[m + 1, k] - x[m, k]
                out[m + 1, j, k] = out[m, j, k] + 0.5 * (x[m, j] * dk - dj * x[m, k])
    return out


def _use_numba(backend):
    if backend is None:
        return USE_NUMBA
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend == "numba"


def levy_area_cumulative(x, backend=None):
    """Cumulative midpoint-rule areas ``A_{t_i, t_0}`` of a path ``x`` of shape (N+1, l).

    The path must be anchored (``x[0] = 0``).  The midpoint rule and the
    polygonal area coincide: the half-increment terms are symmetric.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if _use_numba(backend):
        return _levy_area_numba(x)
    return _levy_area_numpy(x)


# ---------------------------------------------------------------------------
# Mode-field right-hand side
# ---------------------------------------------------------------------------


def profile_jet_numpy(y, family, C, phase, sigma, eta):
    """Profile values (n, l) and gradients (n, l, d) at points ``y`` (n, d)."""
    if family == TRIG:
        arg = y @ C.T + phase
        return np.cos(arg), -np.sin(arg)[:, :, None] * C[None, :, :]
    z = y[:, None, :] - C[None, :, :]
    r2 = np.sum(z * z, axis=2) / sigma**2
    if family == GAUSS:
        g = np.exp(-0.5 * r2)
        return g, -(g / sigma**2)[:, :, None] * z
    q = 1.0 + r2
    g = q ** (-0.5 * eta)
    return g, (-eta * g / (q * sigma**2))[:, :, None] * z


def mode_rhs_numpy(y, b, a, family, U, C, phase, sigma, eta):
    """``sum_k b_k e_k(y) + sum_{j,k} a_jk (De_k)(y) e_j(y)`` for the mode basis."""
    g, grad = profile_jet_numpy(y, family, C, phase, sigma, eta)
    # v[n, k] = sum_j a_jk g_j (U_j . grad_k)
    ug = np.einsum("jd,nkd->njk", U, grad)
    v = np.einsum("jk,nj,njk->nk", a, g, ug)
    return (g * b + v) @ U


def _compose_numpy(x0, b, a, family, U, C, phase, sigma, eta, n_sub, guard):
    x = np.array(x0, dtype=float)
    alive = np.ones(x.shape[0], dtype=bool)
    h = 1.0 / n_sub
    args = (family, U, C, phase, sigma, eta)
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(b.shape[0]):
            bm, am = b[m], a[m]
            for _ in range(n_sub):
                k1 = mode_rhs_numpy(x, bm, am, *args)
                k2 = mode_rhs_numpy(x + 0.5 * h * k1, bm, am, *args)
                k3 = mode_rhs_numpy(x + 0.5 * h * k2, bm, am, *args)
                k4 = mode_rhs_numpy(x + h * k3, bm, am, *args)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = ~np.all(np.isfinite(x), axis=1) | (np.max(np.abs(x), axis=1) > guard)
            if bad.any():
                alive &= ~bad
                x[bad] = np.nan
    return x, ~alive


@njit(cache=True)
def _rhs_point(y, b, a, family, U, C, phase, sigma, eta, g, grad, out):
    ell, d = U.shape
    for k in range(ell):
        if family == 0:
            arg = phase[k]
            for i in range(d):
                arg += C[k, i] * y[i]
            g[k] = math.cos(arg)
            s = -math.sin(arg)
            for i in range(d):
                grad[k, i] = s * C[k, i]
        else:
            r2 = 0.0
            for i in range(d):
                z = y[i] - C[k, i]
                r2 += z * z
            r2 /= sigma[k] * sigma[k]
            if family == 1:
                gk = math.exp(-0.5 * r2)
                coef = -gk / (sigma[k] * sigma[k])
            else:
                q = 1.0 + r2
                gk = q ** (-0.5 * eta)
                coef = -eta * gk / (q * sigma[k] * sigma[k])
            g[k] = gk
            for i in range(d):
                grad[k, i] = coef * (y[i] - C[k, i])
    for i in range(d):
        out[i] = 0.0
    for k in range(ell):
        # scalar weight multiplying U[k]
        w = b[k] * g[k]
        for j in range(ell):
            ajk = a[j, k]
            if ajk != 0.0:
                dot = 0.0
                for i in range(d):
                    dot += U[j, i] * grad[k, i]
                w += ajk * g[j] * dot
        for i in range(d):
            out[i] += w * U[k, i]


@njit(cache=True)
def _compose_numba(x0, b, a, family, U, C, phase, sigma, eta, n_sub, guard):
    n, d = x0.shape
    ell = U.shape[0]
    x = x0.copy()
    blown = np.zeros(n, dtype=np.bool_)
    h = 1.0 / n_sub
    g = np.empty(ell)
    grad = np.empty((ell, d))
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    y = np.empty(d)
    for p in range(n):
        for i in range(d):
            y[i] = x[p, i]
        ok = True
        for m in range(b.shape[0]):
            bm = b[m]
            am = a[m]
            for _ in range(n_sub):
                _rhs_point(y, bm, am, family, U, C, phase, sigma, eta, g, grad, k1)
                for i in range(d):
                    tmp[i] = y[i] + 0.5 * h * k1[i]
                _rhs_point(tmp, bm, am, family, U, C, phase, sigma, eta, g, grad, k2)
                for i in range(d):
                    tmp[i] = y[i] + 0.5 * h * k2[i]
                _rhs_point(tmp, bm, am, family, U, C, phase, sigma, eta, g, grad, k3)
                for i in range(d):
                    tmp[i] = y[i] + h * k3[i]
                _rhs_point(tmp, bm, am, family, U, C, phase, sigma, eta, g, grad, k4)
                for i in range(d):
                    y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for i in range(d):
                if not (abs(y[i]) <= guard):
                    ok = False
            if not ok:
                break
        if ok:
            for i in range(d):
                x[p, i] = y[i]
        else:
            blown[p] = True
            for i in range(d):
                x[p, i] = np.nan
    return x, blown


def compose_chain(x0, b, a, family, U, C, phase, sigma, eta, n_sub=8, guard=np.inf,
                  backend=None):
    """Compose RK4 time-1 maps over consecutive cells for a mode-basis driver.

    Parameters
    ----------
    x0 : (n, d) starting points.
    b : (m, l) first-level coefficients per cell, in composition order.
    a : (m, l, l) antisymmetric areas per cell.
    family, U, C, phase, sigma, eta : mode-basis description.
    n_sub : RK4 substeps per time-1 map.
    guard : sup-norm radius beyond which a trajectory counts as blown up.
    backend : "numba", "numpy" or None for the process default.

    Returns
    -------
    x : (n, d) end points, ``nan`` where blown up.
    blown : (n,) boolean mask.
    """
    x0 = np.ascontiguousarray(np.atleast_2d(x0), dtype=float)
    b = np.ascontiguousarray(b, dtype=float).reshape(-1, U.shape[0])
    a = np.ascontiguousarray(a, dtype=float).reshape(-1, U.shape[0], U.shape[0])
    args = (
        x0, b, a, int(family),
        np.ascontiguousarray(U, dtype=float),
        np.ascontiguousarray(C, dtype=float),
        np.ascontiguousarray(phase, dtype=float),
        np.ascontiguousarray(sigma, dtype=float),
        float(eta), int(n_sub), float(guard),
    )
    if _use_numba(backend):
        return _compose_numba(*args)
    return _compose_numpy(*args)
