"""Simplex drivers bound to one compiled objective each.

A compiled function that receives another compiled function as an argument is
not cached on disk, while these wrappers are, which saves several seconds of
compilation per process.
"""

import numba

from . import _kernels as K
from ._simplex import nelder_mead

_simplex_loop = numba.njit(cache=True)(nelder_mead)


@numba.njit(cache=True)
def simplex_f1_mw(args, x0, step, max_iter, xtol, ftol):
    return _simplex_loop(K.f1_mw, args, x0, step, max_iter, xtol, ftol)


@numba.njit(cache=True)
def simplex_f1_full(args, x0, step, max_iter, xtol, ftol):
    return _simplex_loop(K.f1_full, args, x0, step, max_iter, xtol, ftol)


@numba.njit(cache=True)
def simplex_s1_full(args, x0, step, max_iter, xtol, ftol):
    return _simplex_loop(K.s1_full, args, x0, step, max_iter, xtol, ftol)


@numba.njit(cache=True)
def simplex_s1_mwphi(args, x0, step, max_iter, xtol, ftol):
    return _simplex_loop(K.s1_mwphi, args, x0, step, max_iter, xtol, ftol)


COMPILED_DRIVERS = {
    K.f1_mw: simplex_f1_mw,
    K.f1_full: simplex_f1_full,
    K.s1_full: simplex_s1_full,
    K.s1_mwphi: simplex_s1_mwphi,
}
