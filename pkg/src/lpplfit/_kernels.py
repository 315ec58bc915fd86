"""Compiled inner loops: design matrices, least squares and profiled costs.

Every objective here has the signature ``func(x, args) -> float`` so it can be
handed to the compiled simplex in :mod:`lpplfit.optimize`.
"""

from __future__ import annotations

import numba
import numpy as np

from ._simplex import PENALTY
from .core import EPS_T

DEFAULT_COND_LIMIT = 1e12


@numba.njit(cache=True)
def design4(log_dt, m, omega):
    """Design matrix stored by columns, shape (4, n): 1, f, g, h."""
    n = log_dt.shape[0]
    X = np.empty((4, n))
    for i in range(n):
        f = np.exp(m * log_dt[i])
        p = omega * log_dt[i]
        X[0, i] = 1.0
        X[1, i] = f
        X[2, i] = f * np.cos(p)
        X[3, i] = f * np.sin(p)
    return X


@numba.njit(cache=True)
def design3(log_dt, m, omega, phi):
    """Phase-form design matrix stored by columns, shape (3, n)."""
    n = log_dt.shape[0]
    X = np.empty((3, n))
    for i in range(n):
        f = np.exp(m * log_dt[i])
        X[0, i] = 1.0
        X[1, i] = f
        X[2, i] = f * np.cos(omega * log_dt[i] - phi)
    return X


@numba.njit(cache=True)
def mgs_lstsq(X, y):
    """Least squares by modified Gram-Schmidt on the augmented matrix [X | y].

    ``X`` holds one column per row, shape (k, n), and is overwritten with the
    orthonormal factor. Returns (coefficients, residual sum of squares,
    conditioning) where the conditioning is max/min of the orthogonalized
    column norms.
    """
    k, n = X.shape
    R = np.zeros((k, k))
    qty = np.zeros(k)
    r = y.copy()
    for j in range(k):
        xj = X[j]
        for i in range(j):
            xi = X[i]
            s = 0.0
            for q in range(n):
                s += xi[q] * xj[q]
            R[i, j] = s
            for q in range(n):
                xj[q] -= s * xi[q]
        s = 0.0
        for q in range(n):
            s += xj[q] * xj[q]
        s = np.sqrt(s)
        R[j, j] = s
        if s == 0.0:
            return np.full(k, np.nan), np.inf, np.inf
        for q in range(n):
            xj[q] /= s
        s = 0.0
        for q in range(n):
            s += xj[q] * r[q]
        qty[j] = s
        for q in range(n):
            r[q] -= s * xj[q]

    dmax = 0.0
    dmin = np.inf
    for j in range(k):
        d = abs(R[j, j])
        dmax = max(dmax, d)
        dmin = min(dmin, d)
    cond = dmax / dmin

    coef = np.zeros(k)
    for j in range(k - 1, -1, -1):
        s = qty[j]
        for i in range(j + 1, k):
            s -= R[j, i] * coef[i]
        coef[j] = s / R[j, j]

    ssr = 0.0
    for q in range(n):
        ssr += r[q] * r[q]
    return coef, ssr, cond


@numba.njit(cache=True)
def log_time_to_critical(times, t_c):
    """ln(t_c - t), or an empty array when t_c is too close to the data."""
    n = times.shape[0]
    out = np.empty(n)
    for i in range(n):
        dt = t_c - times[i]
        if not dt >= EPS_T:
            return np.empty(0)
        out[i] = np.log(dt)
    return out


@numba.njit(cache=True)
def _guard(ssr, cond, cond_limit):
    if not np.isfinite(ssr) or not cond <= cond_limit:
        return PENALTY
    return ssr


@numba.njit(cache=True)
def f1_mw(x, args):
    """F1 over (m, omega) at a fixed critical time; args = (log_dt, y, cond_limit)."""
    log_dt, y, cond_limit = args
    X = design4(log_dt, x[0], x[1])
    _, ssr, cond = mgs_lstsq(X, y)
    return _guard(ssr, cond, cond_limit)


@numba.njit(cache=True)
def f1_full(x, args):
    """F1 over (t_c, m, omega); args = (times, y, cond_limit)."""
    times, y, cond_limit = args
    log_dt = log_time_to_critical(times, x[0])
    if log_dt.shape[0] == 0:
        return PENALTY
    X = design4(log_dt, x[1], x[2])
    _, ssr, cond = mgs_lstsq(X, y)
    return _guard(ssr, cond, cond_limit)


@numba.njit(cache=True)
def s1_full(x, args):
    """Legacy S1 over (t_c, m, omega, phi); args = (times, y, cond_limit)."""
    times, y, cond_limit = args
    log_dt = log_time_to_critical(times, x[0])
    if log_dt.shape[0] == 0:
        return PENALTY
    X = design3(log_dt, x[1], x[2], x[3])
    _, ssr, cond = mgs_lstsq(X, y)
    return _guard(ssr, cond, cond_limit)


@numba.njit(cache=True)
def s1_mwphi(x, args):
    """Legacy S1 over (m, omega, phi) at a fixed critical time; args = (log_dt, y, cond_limit)."""
    log_dt, y, cond_limit = args
    X = design3(log_dt, x[0], x[1], x[2])
    _, ssr, cond = mgs_lstsq(X, y)
    return _guard(ssr, cond, cond_limit)

