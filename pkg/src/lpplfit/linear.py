"""Slaved linear parameters for fixed nonlinear LPPL parameters.

For fixed (t_c, m, omega) the LPPL is linear in (A, B, C1, C2), and for fixed
(t_c, m, omega, phi) the phase form is linear in (A, B, C). Both subproblems
are solved here, by default through an orthogonal factorization of the design
matrix. ``method="normal"`` forms the normal equations and solves them by LU,
which is useful as a cross-check but squares the condition number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .core import EPS_T, DomainError

MIN_POINTS = 5


class RankDeficiencyError(np.linalg.LinAlgError):
    """The design matrix is too close to rank deficient to trust the solution."""

    def __init__(self, condition: float, limit: float):
        super().__init__(f"design matrix conditioning {condition:.3g} exceeds limit {limit:.3g}")
        self.condition = condition
        self.limit = limit


@dataclass(frozen=True)
class BasisColumns:
    y: np.ndarray
    ones: np.ndarray
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.column_stack((self.ones, self.f, self.g, self.h))

    def phase_matrix(self, phi: float) -> np.ndarray:
        # f cos(w ln dt - phi) = g cos(phi) + h sin(phi)
        return np.column_stack((self.ones, self.f, self.g * np.cos(phi) + self.h * np.sin(phi)))


@dataclass(frozen=True)
class LinearSolution:
    coefficients: np.ndarray
    sum_squared_residuals: float
    condition_diagnostic: float


def build_basis(times, log_price, t_c: float, m: float, omega: float) -> BasisColumns:
    times = np.asarray(times, dtype=float)
    y = np.asarray(log_price, dtype=float)
    if times.ndim != 1 or times.shape != y.shape:
        raise ValueError("times and log_price must be 1-D arrays of equal length")
    if times.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} observations, got {times.size}")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if not t_c > times[-1] + EPS_T:
        raise DomainError(f"t_c={t_c} must exceed the last observation time {times[-1]} by {EPS_T}")
    ones, f, g, h = _kernels.design4(np.log(t_c - times), float(m), float(omega))
    return BasisColumns(y=y, ones=ones, f=f, g=g, h=h)


def _solve(X: np.ndarray, y: np.ndarray, method: str, cond_limit: float) -> LinearSolution:
    if method == "qr":
        coef, ssr, cond = _kernels.mgs_lstsq(np.ascontiguousarray(X.T, dtype=float), y)
    elif method == "normal":
        # same diagnostic as the QR path: it describes the design, not the solver
        _, _, cond = _kernels.mgs_lstsq(np.ascontiguousarray(X.T, dtype=float), y)
        if not cond <= cond_limit:
            raise RankDeficiencyError(cond, cond_limit)
        coef = scipy.linalg.lu_solve(scipy.linalg.lu_factor(X.T @ X), X.T @ y)
        r = y - X @ coef
        ssr = float(r @ r)
    else:
        raise ValueError(f"unknown method {method!r}; expected 'qr' or 'normal'")
    if not cond <= cond_limit:
        raise RankDeficiencyError(cond, cond_limit)
    return LinearSolution(np.asarray(coef), float(ssr), float(cond))


def solve_linear4(
    basis: BasisColumns, method: str = "qr", cond_limit: float = _kernels.DEFAULT_COND_LIMIT
) -> LinearSolution:
    """Best (A, B, C1, C2) for the basis; raises RankDeficiencyError when degenerate."""
    return _solve(basis.matrix(), basis.y, method, cond_limit)


def solve_linear3(
    basis: BasisColumns, phi: float, method: str = "qr", cond_limit: float = _kernels.DEFAULT_COND_LIMIT
) -> LinearSolution:
    """Best (A, B, C) of the phase form with the phase held at ``phi``."""
    return _solve(basis.phase_matrix(phi), basis.y, method, cond_limit)


def normal_equations(basis: BasisColumns) -> tuple[np.ndarray, np.ndarray]:
    """The 4x4 system (X'X, X'y) whose solution is the slaved coefficient vector."""
    X = basis.matrix()
    return X.T @ X, X.T @ basis.y


def cost_F(times, log_price, t_c, m, omega, A, B, C1, C2) -> float:
    """Sum of squared residuals of the cartesian LPPL over the given observations."""
    times = np.asarray(times, dtype=float)
    y = np.asarray(log_price, dtype=float)
    if not np.all(t_c - times >= EPS_T):
        raise DomainError(f"t_c={t_c} must exceed every observation time")
    log_dt = np.log(t_c - times)
    f = np.exp(m * log_dt)
    r = y - A - f * (B + C1 * np.cos(omega * log_dt) + C2 * np.sin(omega * log_dt))
    return float(r @ r)
