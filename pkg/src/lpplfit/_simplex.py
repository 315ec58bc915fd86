"""Nelder-Mead simplex loop, written to run both interpreted and under numba.

``func(x, args)`` is the objective. Non-finite values and values at or above
PENALTY are treated as the penalty, so a start may wander out of the domain
without stopping the search.
"""

import numba
import numpy as np

PENALTY = 1e300

REFLECT = 1.0
EXPAND = 2.0
CONTRACT = 0.5
SHRINK = 0.5


def nelder_mead(func, args, x0, step, max_iter, xtol, ftol):
    n = x0.shape[0]
    sim = np.empty((n + 1, n))
    fsim = np.empty(n + 1)
    for i in range(n + 1):
        for j in range(n):
            sim[i, j] = x0[j]
        if i > 0:
            sim[i, i - 1] += step[i - 1]
    nfev = 0
    for i in range(n + 1):
        v = func(sim[i], args)
        nfev += 1
        fsim[i] = v if np.isfinite(v) and v < PENALTY else PENALTY

    centroid = np.empty(n)
    nit = 0
    converged = False
    while True:
        order = np.argsort(fsim, kind="mergesort")
        sim = sim[order]
        fsim = fsim[order]

        xspread = 0.0
        fspread = 0.0
        for i in range(1, n + 1):
            fspread = max(fspread, abs(fsim[i] - fsim[0]))
            for j in range(n):
                xspread = max(xspread, abs(sim[i, j] - sim[0, j]))
        if fsim[0] < PENALTY and xspread <= xtol and fspread <= ftol:
            converged = True
            break
        if fsim[0] >= PENALTY or nit >= max_iter:
            break
        nit += 1

        for j in range(n):
            s = 0.0
            for i in range(n):
                s += sim[i, j]
            centroid[j] = s / n
        worst = sim[n].copy()

        xr = centroid + REFLECT * (centroid - worst)
        fr = func(xr, args)
        nfev += 1
        if not (np.isfinite(fr) and fr < PENALTY):
            fr = PENALTY

        shrink = False
        if fr < fsim[0]:
            xe = centroid + EXPAND * (centroid - worst)
            fe = func(xe, args)
            nfev += 1
            if not (np.isfinite(fe) and fe < PENALTY):
                fe = PENALTY
            if fe < fr:
                sim[n] = xe
                fsim[n] = fe
            else:
                sim[n] = xr
                fsim[n] = fr
        elif fr < fsim[n - 1]:
            sim[n] = xr
            fsim[n] = fr
        else:
            if fr < fsim[n]:
                xc = centroid + CONTRACT * (xr - centroid)
                fc = func(xc, args)
                nfev += 1
                if not (np.isfinite(fc) and fc < PENALTY):
                    fc = PENALTY
                if fc <= fr:
                    sim[n] = xc
                    fsim[n] = fc
                else:
                    shrink = True
            else:
                xc = centroid + CONTRACT * (worst - centroid)
                fc = func(xc, args)
                nfev += 1
                if not (np.isfinite(fc) and fc < PENALTY):
                    fc = PENALTY
                if fc < fsim[n]:
                    sim[n] = xc
                    fsim[n] = fc
                else:
                    shrink = True
            if shrink:
                for i in range(1, n + 1):
                    sim[i] = sim[0] + SHRINK * (sim[i] - sim[0])
                    v = func(sim[i], args)
                    nfev += 1
                    fsim[i] = v if np.isfinite(v) and v < PENALTY else PENALTY

    return sim[0].copy(), fsim[0], nit, nfev, converged



nelder_mead_compiled = numba.njit(cache=True)(nelder_mead)
