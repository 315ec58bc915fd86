"""LPPL calibration with slaved linear parameters and critical-time profiling.

The fitting pipeline works on three levels:

* ``f1``: sum of squared residuals at fixed (t_c, m, omega), with the four
  linear parameters (A, B, C1, C2) solved exactly.
* ``minimize_mw``: the best ``f1`` over (m, omega) at fixed t_c, found by a
  seeded multi-start simplex search. Its value is the profile ``F2(t_c)``.
* ``profile_tc`` / ``fit``: ``F2`` on a grid of critical times past the window
  end, followed by a bracketed 1-D refinement of the best grid point.

``legacy_fit`` searches the older four-dimensional (t_c, m, omega, phi) space
with three slaved linear parameters. It exists to cross-check the main path.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .core import (
    EPS_T,
    M_BOUNDS,
    OMEGA_BOUNDS,
    TWO_PI,
    DomainError,
    LpplParams,
    PhaseParams,
    QualificationReport,
    in_stylized_box,
    normalize_phase,
    qualify,
)
from .data import MIN_WINDOW, FitWindow, PriceSeries
from .linear import RankDeficiencyError, build_basis, cost_F, solve_linear3, solve_linear4
from .optimize import (
    SIMPLEX_SCALE,
    LocalMinimum,
    OptimizerConfig,
    SearchBox,
    cluster_minima,
    local_minimize,
    start_points,
)

log = logging.getLogger(__name__)

MW_BOX = SearchBox((M_BOUNDS[0], OMEGA_BOUNDS[0]), (M_BOUNDS[1], OMEGA_BOUNDS[1]))
MW_CLUSTER_TOLERANCE = (0.02, 0.2)
TC_CLUSTER_TOLERANCE = 0.5
PHI_CLUSTER_TOLERANCE = 0.1
WORKERS_ENV = "LPPLFIT_WORKERS"


class CalibrationError(RuntimeError):
    """No usable fit could be produced (every start or grid point failed)."""


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class FitConfig:
    optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(cluster_tolerance=MW_CLUSTER_TOLERANCE)
    )
    # critical-time grid, in trading days past the window end
    tc_first: float = 1.0
    tc_horizon: float = 90.0
    tc_step: float = 1.0
    # a minimum counts as distinct only if its cost is within this factor of the best
    minima_cost_factor: float = 10.0
    cond_limit: float = _kernels.DEFAULT_COND_LIMIT
    # starts for the four-dimensional legacy search
    legacy_n_starts: int = 20
    min_window: int = MIN_WINDOW
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.tc_first <= self.tc_horizon:
            raise ValueError("need 0 < tc_first <= tc_horizon")
        if not self.tc_step > 0:
            raise ValueError("tc_step must be positive")
        if not self.minima_cost_factor >= 1:
            raise ValueError("minima_cost_factor must be >= 1")
        if self.legacy_n_starts < 1 or self.workers < 1:
            raise ValueError("legacy_n_starts and workers must be positive")

    def with_seed(self, seed: int) -> "FitConfig":
        return replace(self, optimizer=replace(self.optimizer, rng_seed=seed))


@dataclass
class MwResult:
    m_hat: float
    omega_hat: float
    f2_value: float
    minima_count: int
    clusters: list[LocalMinimum]
    n_evaluations: int


@dataclass
class TcProfile:
    tc_grid: np.ndarray
    f2_values: np.ndarray
    m_hat: np.ndarray
    omega_hat: np.ndarray
    qualified: np.ndarray
    minima_counts: np.ndarray
    local_minima: list[int]
    n_evaluations: int = 0

    @property
    def best_index(self) -> int:
        return int(np.nanargmin(self.f2_values))

    def rows(self):
        for i in range(self.tc_grid.size):
            yield {
                "t_c": float(self.tc_grid[i]),
                "f2": float(self.f2_values[i]),
                "m_hat": float(self.m_hat[i]),
                "omega_hat": float(self.omega_hat[i]),
                "qualified": bool(self.qualified[i]),
                "minima_count": int(self.minima_counts[i]),
                "local_minimum": i in self.local_minima,
            }


@dataclass
class FitResult:
    params: LpplParams
    phase_view: PhaseParams
    cost: float
    qualification: QualificationReport
    minima_count: int
    profile: TcProfile | None
    diagnostics: np.ndarray
    window: FitWindow
    n_evaluations: int = 0


def _window_data(series: PriceSeries, window: FitWindow):
    if window.end_index >= len(series):
        raise ValueError(f"window end {window.end_index} beyond series of length {len(series)}")
    times, y = series.window(window)
    return np.ascontiguousarray(times), np.ascontiguousarray(y)


def _anchored(series: PriceSeries, window: FitWindow):
    """(t2, t2 - t, y) for the window.

    Internally a critical time is the offset u = t_c - t2 and t_c - t is
    evaluated as u + (t2 - t). On a trading-day index t2 - t is exact, so a
    shifted time axis reproduces every intermediate value bit for bit.
    """
    times, y = _window_data(series, window)
    t_end = float(times[-1])
    return t_end, np.ascontiguousarray(t_end - times), y


def _coefficients(log_dt, y, m, omega, cond_limit) -> np.ndarray:
    X = _kernels.design4(log_dt, m, omega)
    cols = X.copy()
    coef, ssr, cond = _kernels.mgs_lstsq(X, y)
    if not cond <= cond_limit:
        raise RankDeficiencyError(cond, cond_limit)
    # contributions below the rounding level of the data are set to zero, so
    # for example a flat series yields B = 0 exactly
    floor = 64 * np.finfo(float).eps * max(np.linalg.norm(y), 1e-300)
    for j in range(1, 4):
        if abs(coef[j]) * np.linalg.norm(cols[j]) <= floor:
            coef[j] = 0.0
    return coef


def _params(t_end, rel, y, u, m, omega, cond_limit) -> LpplParams:
    A, B, C1, C2 = (float(c) for c in _coefficients(np.log(u + rel), y, m, omega, cond_limit))
    return LpplParams(t_end + float(u), float(m), float(omega), A, B, C1, C2)


def f1(series: PriceSeries, window: FitWindow, t_c: float, m: float, omega: float, cond_limit=None) -> float:
    """Residual sum of squares with (A, B, C1, C2) slaved to (t_c, m, omega)."""
    times, y = _window_data(series, window)
    limit = _kernels.DEFAULT_COND_LIMIT if cond_limit is None else cond_limit
    return solve_linear4(build_basis(times, y, t_c, m, omega), cond_limit=limit).sum_squared_residuals


def s1(series: PriceSeries, window: FitWindow, t_c: float, m: float, omega: float, phi: float, cond_limit=None) -> float:
    """Legacy residual sum of squares with (A, B, C) slaved to (t_c, m, omega, phi)."""
    times, y = _window_data(series, window)
    limit = _kernels.DEFAULT_COND_LIMIT if cond_limit is None else cond_limit
    return solve_linear3(build_basis(times, y, t_c, m, omega), phi, cond_limit=limit).sum_squared_residuals


def slaved_params(times, y, t_c: float, m: float, omega: float, cond_limit: float = _kernels.DEFAULT_COND_LIMIT) -> LpplParams:
    """Full cartesian parameter set with the linear part solved exactly.

    Coefficients whose contribution is below rounding level of the data are
    set to zero so that, for example, a flat series yields B = 0 exactly.
    """
    basis = build_basis(times, y, t_c, m, omega)
    log_dt = np.log(t_c - np.asarray(times, dtype=float))
    A, B, C1, C2 = (float(c) for c in _coefficients(log_dt, basis.y, m, omega, cond_limit))
    return LpplParams(float(t_c), float(m), float(omega), A, B, C1, C2)


def _mw_search(log_dt, y, config: FitConfig) -> MwResult:
    opt = config.optimizer
    args = (log_dt, y, float(config.cond_limit))
    step = SIMPLEX_SCALE * MW_BOX.width
    results = [
        local_minimize(_kernels.f1_mw, x0, opt, step=step, args=args)
        for x0 in start_points(MW_BOX, opt.n_starts, opt.rng_seed)
    ]
    n_eval = sum(r.n_evaluations for r in results)
    clusters = cluster_minima(results, opt.cluster_tolerance or MW_CLUSTER_TOLERANCE)
    if not clusters:
        raise CalibrationError("no (m, omega) start produced a finite cost")
    best = clusters[0]
    count = sum(
        1
        for c in clusters
        if in_stylized_box(c.location[0], c.location[1]) and c.value <= config.minima_cost_factor * best.value
    )
    return MwResult(float(best.location[0]), float(best.location[1]), float(best.value), count, clusters, n_eval)


def minimize_mw(series: PriceSeries, window: FitWindow, t_c: float, config: FitConfig = FitConfig()) -> MwResult:
    """Profile value F2(t_c) with the slaved (m_hat, omega_hat) and the count of distinct minima."""
    t_end, rel, y = _anchored(series, window)
    if not t_c > t_end + EPS_T:
        raise DomainError(f"t_c={t_c} must lie beyond the window end {t_end}")
    return _mw_search(np.log((t_c - t_end) + rel), y, config)


def tc_grid(window_end: float, config: FitConfig) -> np.ndarray:
    n = int(math.floor((config.tc_horizon - config.tc_first) / config.tc_step + 1e-9)) + 1
    return window_end + config.tc_first + config.tc_step * np.arange(n)


def grid_local_minima(values: np.ndarray) -> list[int]:
    """Interior points strictly below both neighbours; a flat run counts once, at its first index."""
    v = np.asarray(values, dtype=float)
    out = []
    i = 1
    while i < v.size - 1:
        j = i
        while j + 1 < v.size and v[j + 1] == v[i]:
            j += 1
        if j < v.size - 1 and np.isfinite(v[i]) and v[i] < v[i - 1] and v[i] < v[j + 1]:
            out.append(i)
        i = j + 1
    return out


def _profile_point(task):
    t_end, rel, y, u, config = task
    try:
        res = _mw_search(np.log(u + rel), y, config)
        params = _params(t_end, rel, y, u, res.m_hat, res.omega_hat, config.cond_limit)
        qualified = qualify(params, t_end).qualified
    except (CalibrationError, RankDeficiencyError, FloatingPointError) as exc:
        log.debug("profile point t_c=%s failed: %s", t_end + u, exc)
        return None
    return res.f2_value, res.m_hat, res.omega_hat, qualified, res.minima_count, res.n_evaluations


def _map(func, tasks, workers: int):
    if workers <= 1 or len(tasks) < 2:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves task order, so output is independent of scheduling
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def profile_tc(series: PriceSeries, window: FitWindow, config: FitConfig = FitConfig()) -> TcProfile:
    """F2, m_hat, omega_hat and qualification on the critical-time grid."""
    t_end, rel, y = _anchored(series, window)
    offsets = tc_grid(0.0, config)
    grid = t_end + offsets
    outcomes = _map(_profile_point, [(t_end, rel, y, float(u), config) for u in offsets], config.workers)
    if all(o is None for o in outcomes):
        raise CalibrationError("every critical-time grid point failed")
    nan = (np.nan, np.nan, np.nan, False, 0, 0)
    f2v, mh, wh, q, cnt, nev = (np.array(col) for col in zip(*(o if o is not None else nan for o in outcomes)))
    return TcProfile(
        tc_grid=grid,
        f2_values=f2v.astype(float),
        m_hat=mh.astype(float),
        omega_hat=wh.astype(float),
        qualified=q.astype(bool),
        minima_counts=cnt.astype(int),
        local_minima=grid_local_minima(f2v.astype(float)),
        n_evaluations=int(nev.sum()),
    )


class _WarmF2:
    """F2 near a known minimum, as a function of the offset u = t_c - t2.

    One simplex run warm-started from (m0, omega0) per call; tracks the best
    (value, u, m, omega) seen.
    """

    def __init__(self, rel, y, m0, omega0, config: FitConfig):
        self.rel, self.y = rel, y
        self.x0 = np.array([m0, omega0])
        self.config = config
        self.n_evaluations = 0
        self.best: tuple[float, float, float, float] | None = None

    def __call__(self, u: float) -> float:
        args = (np.log(u + self.rel), self.y, float(self.config.cond_limit))
        r = local_minimize(
            _kernels.f1_mw, self.x0, self.config.optimizer, step=SIMPLEX_SCALE * MW_BOX.width, args=args
        )
        self.n_evaluations += r.n_evaluations
        if self.best is None or r.value < self.best[0]:
            self.best = (r.value, u, float(r.location[0]), float(r.location[1]))
        return r.value


def _model_jacobian(dt, u_m_omega, coef):
    """Model derivatives d(X c)/d(u, m, omega), shape (n, 3), and the design X (n, 4)."""
    _, m, omega = u_m_omega
    L = np.log(dt)
    f = np.exp(m * L)
    g = f * np.cos(omega * L)
    h = f * np.sin(omega * L)
    X = np.column_stack((np.ones_like(f), f, g, h))
    _, B, C1, C2 = coef
    d_u = (B * m * f + C1 * (m * g - omega * h) + C2 * (m * h + omega * g)) / dt
    d_m = L * (B * f + C1 * g + C2 * h)
    d_omega = L * (C2 * g - C1 * h)
    return np.column_stack((d_u, d_m, d_omega)), X


def _polish(rel, y, u, m, omega, bounds, config: FitConfig, max_iter: int = 30):
    """Variable-projection Gauss-Newton on (u, m, omega) from a simplex solution.

    The simplex stops once its spread is below tolerance. In the flat valley
    of F1 the cost then differs from the optimum only at rounding level, yet
    the slaved level A can still be off by ~1e-7. The projected gradient
    -2 r'(dX/dtheta)c is accurate far below the cost noise, so Gauss-Newton
    steps on it land on the stationary point itself. The iterate with the
    smallest gradient is returned as (value, u, m, omega, n_evaluations).
    """
    lo, hi = bounds
    theta = np.array([u, m, omega], dtype=float)
    best = None
    n_eval = 0
    for _ in range(max_iter):
        dt = theta[0] + rel
        if not (lo <= theta[0] <= hi and np.all(dt >= EPS_T)):
            break
        D_probe, X = _model_jacobian(dt, theta, np.zeros(4))
        Q, R = np.linalg.qr(X)
        d = np.abs(np.diag(R))
        if not d.max() <= config.cond_limit * d.min():
            break
        coef = np.linalg.solve(R, Q.T @ y)
        r = y - X @ coef
        D, _ = _model_jacobian(dt, theta, coef)
        n_eval += 1
        grad = -2.0 * (r @ D)
        gnorm = float(np.max(np.abs(grad) * np.maximum(1.0, np.abs(theta))))
        if best is not None and gnorm >= best[0]:
            break
        best = (gnorm, float(r @ r), theta.copy())
        J = D - Q @ (Q.T @ D)  # projected Jacobian; r is already orthogonal to X
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(theta))):
            break
        theta = theta + step
    if best is None:
        return math.inf, u, m, omega, n_eval
    _, value, th = best
    return value, float(th[0]), float(th[1]), float(th[2]), n_eval


def _result(times, y, params: LpplParams, window, minima_count, profile, n_evaluations, phase_view=None) -> FitResult:
    cost = cost_F(times, y, params.t_c, params.m, params.omega, params.A, params.B, params.C1, params.C2)
    log_dt = np.log(params.t_c - times)
    f = np.exp(params.m * log_dt)
    model = params.A + f * (
        params.B + params.C1 * np.cos(params.omega * log_dt) + params.C2 * np.sin(params.omega * log_dt)
    )
    return FitResult(
        params=params,
        phase_view=params.to_phase() if phase_view is None else phase_view,
        cost=cost,
        qualification=qualify(params, float(times[-1])),
        minima_count=minima_count,
        profile=profile,
        diagnostics=y - model,
        window=window,
        n_evaluations=n_evaluations,
    )


def _slaved_or_flat(times, y, t_c, m, omega, cond_limit) -> LpplParams:
    try:
        return slaved_params(times, y, t_c, m, omega, cond_limit)
    except RankDeficiencyError:
        # degenerate nonlinear point: keep the mean level only, which cannot qualify
        return LpplParams(float(t_c), float(m), float(omega), float(np.mean(y)), 0.0, 0.0, 0.0)


def fit(series: PriceSeries, window: FitWindow, config: FitConfig = FitConfig()) -> FitResult:
    """Profile F2 over the t_c grid, refine the best point, and solve the full parameter set.

    An unqualified fit is a normal outcome; check ``result.qualification``.
    """
    t_end, rel, y = _anchored(series, window)
    profile = profile_tc(series, window, config)
    k = profile.best_index
    offsets = tc_grid(0.0, config)
    lo = offsets[k - 1] if k > 0 else offsets[k]
    hi = offsets[k + 1] if k < offsets.size - 1 else offsets[k]
    best = (float(profile.f2_values[k]), float(offsets[k]), float(profile.m_hat[k]), float(profile.omega_hat[k]))
    n_eval = profile.n_evaluations

    if hi > lo:
        warm = _WarmF2(rel, y, best[2], best[3], config)
        minimize_scalar(warm, bounds=(lo, hi), method="bounded", options={"xatol": 1e-7, "maxiter": 200})
        n_eval += warm.n_evaluations
        if warm.best is not None and warm.best[0] < best[0]:
            best = warm.best

    # full multi-start at the refined critical time; it can only lower the cost
    mw = _mw_search(np.log(best[1] + rel), y, config)
    n_eval += mw.n_evaluations
    if mw.f2_value < best[0]:
        best = (mw.f2_value, best[1], mw.m_hat, mw.omega_hat)

    polished = _polish(rel, y, best[1], best[2], best[3], (min(lo, best[1]), max(hi, best[1])), config)
    n_eval += polished[4]
    # the polish may only tie the simplex cost within rounding, never exceed
    # the best grid point
    grid_best = float(profile.f2_values[k])
    if polished[0] <= best[0] * (1 + 1e-12) and polished[0] <= grid_best:
        best = polished[:4]

    _, u, m, omega = best
    try:
        params = _params(t_end, rel, y, u, m, omega, config.cond_limit)
    except RankDeficiencyError:
        # degenerate nonlinear point: keep the mean level only, which cannot qualify
        params = LpplParams(t_end + float(u), float(m), float(omega), float(np.mean(y)), 0.0, 0.0, 0.0)
    times, _ = _window_data(series, window)
    return _result(times, y, params, window, mw.minima_count, profile, n_eval)


def legacy_box(window_end: float, config: FitConfig) -> SearchBox:
    return SearchBox(
        (window_end + config.tc_first, M_BOUNDS[0], OMEGA_BOUNDS[0], 0.0),
        (window_end + config.tc_horizon, M_BOUNDS[1], OMEGA_BOUNDS[1], TWO_PI),
    )


def legacy_fit(series: PriceSeries, window: FitWindow, config: FitConfig = FitConfig()) -> FitResult:
    """Multi-start simplex over (t_c, m, omega, phi) with (A, B, C) slaved."""
    times, y = _window_data(series, window)
    box = legacy_box(times[-1], config)
    opt = replace(
        config.optimizer,
        n_starts=config.legacy_n_starts,
        cluster_tolerance=(TC_CLUSTER_TOLERANCE, *MW_CLUSTER_TOLERANCE, PHI_CLUSTER_TOLERANCE),
    )
    args = (times, y, float(config.cond_limit))
    step = SIMPLEX_SCALE * box.width
    results = [
        local_minimize(_kernels.s1_full, x0, opt, step=step, args=args)
        for x0 in start_points(box, opt.n_starts, opt.rng_seed)
    ]
    n_eval = sum(r.n_evaluations for r in results)
    clusters = cluster_minima(results, opt.cluster_tolerance)
    if not clusters:
        raise CalibrationError("no legacy start produced a finite cost")
    t_c, m, omega, phi = (float(v) for v in clusters[0].location)
    basis = build_basis(times, y, t_c, m, omega)
    A, B, C = solve_linear3(basis, phi, cond_limit=config.cond_limit).coefficients
    if C < 0:
        C, phi = -C, phi + math.pi
    phase = PhaseParams(t_c, m, omega, float(A), float(B), float(C), normalize_phase(phi))
    count = sum(
        1
        for c in clusters
        if in_stylized_box(c.location[1], c.location[2]) and c.value <= config.minima_cost_factor * clusters[0].value
    )
    return _result(times, y, phase.to_cartesian(), window, count, None, n_eval, phase_view=phase)


AXES = ("tc", "m", "omega", "phi")


@dataclass
class CrossSection:
    cost: str
    axes: tuple[str, str]
    fixed: dict[str, float]
    first: np.ndarray
    second: np.ndarray
    values: np.ndarray  # shape (first.size, second.size); NaN where undefined

    def rows(self):
        for i, a in enumerate(self.first):
            for j, b in enumerate(self.second):
                yield {self.axes[0]: float(a), self.axes[1]: float(b), "value": float(self.values[i, j])}


def default_axis_grid(axis: str, window_end: float, config: FitConfig = FitConfig()) -> np.ndarray:
    if axis == "tc":
        return tc_grid(window_end, config)
    if axis == "m":
        return np.linspace(M_BOUNDS[0], M_BOUNDS[1], 41)
    if axis == "omega":
        return np.linspace(OMEGA_BOUNDS[0], OMEGA_BOUNDS[1], 71)
    if axis == "phi":
        return np.linspace(0.0, TWO_PI, 72, endpoint=False)
    raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")


def cross_section(
    series: PriceSeries,
    window: FitWindow,
    axes: tuple[str, str],
    fixed: dict[str, float],
    grids: dict[str, np.ndarray] | None = None,
    cost: str = "F1",
    config: FitConfig = FitConfig(),
) -> CrossSection:
    """Cost on a 2-D grid over two axes with the remaining nonlinear parameters fixed.

    ``cost="F1"`` uses (tc, m, omega); ``cost="S1"`` adds the phase ``phi``.
    """
    if cost not in ("F1", "S1"):
        raise ValueError("cost must be 'F1' or 'S1'")
    names = ("tc", "m", "omega") if cost == "F1" else AXES
    a, b = axes
    if a == b or a not in names or b not in names:
        raise ValueError(f"axes must be two distinct names from {names}")
    missing = [n for n in names if n not in axes and n not in fixed]
    if missing:
        raise ValueError(f"missing fixed values for {missing}")
    times, y = _window_data(series, window)
    grids = dict(grids or {})
    ga = np.asarray(grids.get(a, default_axis_grid(a, times[-1], config)), dtype=float)
    gb = np.asarray(grids.get(b, default_axis_grid(b, times[-1], config)), dtype=float)
    func = _kernels.f1_full if cost == "F1" else _kernels.s1_full
    args = (times, y, float(config.cond_limit))
    point = {n: float(fixed[n]) for n in names if n not in axes}
    values = np.empty((ga.size, gb.size))
    for i, va in enumerate(ga):
        for j, vb in enumerate(gb):
            point[a], point[b] = va, vb
            v = func(np.array([point[n] for n in names]), args)
            values[i, j] = v if v < _kernels.PENALTY else np.nan
    return CrossSection(cost, (a, b), {n: point[n] for n in names if n not in axes}, ga, gb, values)


def grid_local_minima_2d(values: np.ndarray) -> list[tuple[int, int]]:
    """Interior cells strictly below all eight neighbours."""
    v = np.asarray(values, dtype=float)
    out = []
    for i in range(1, v.shape[0] - 1):
        for j in range(1, v.shape[1] - 1):
            c = v[i, j]
            if not np.isfinite(c):
                continue
            block = v[i - 1 : i + 2, j - 1 : j + 2].copy()
            block[1, 1] = np.inf
            if np.all(c < block):
                out.append((i, j))
    return out


@dataclass
class WindowRecord:
    start_index: int
    end_index: int
    start_date: str
    end_date: str
    minima_count: int = 0
    best_t_c: float = math.nan
    best_m: float = math.nan
    best_omega: float = math.nan
    best_cost: float = math.nan
    qualified: bool = False
    qualified_grid_points: int = 0
    error: str | None = None


@dataclass
class ScanReport:
    window_length: int
    step: int
    records: list[WindowRecord]

    def minima_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for r in self.records:
            if r.error is None:
                hist[r.minima_count] = hist.get(r.minima_count, 0) + 1
        return dict(sorted(hist.items()))


def _scan_window(task) -> WindowRecord:
    series, start, end, config = task
    rec = WindowRecord(start, end, series.dates[start].isoformat(), series.dates[end].isoformat())
    try:
        window = FitWindow(start, end, min_length=config.min_window)
        profile = profile_tc(series, window, replace(config, workers=1))
    except (CalibrationError, ValueError, RankDeficiencyError) as exc:
        rec.error = str(exc)
        return rec
    times, y = _window_data(series, window)
    k = profile.best_index
    params = _slaved_or_flat(times, y, profile.tc_grid[k], profile.m_hat[k], profile.omega_hat[k], config.cond_limit)
    rec.minima_count = int(np.max(profile.minima_counts))
    rec.best_t_c, rec.best_m, rec.best_omega = params.t_c, params.m, params.omega
    rec.best_cost = float(profile.f2_values[k])
    rec.qualified = qualify(params, float(times[-1])).qualified
    rec.qualified_grid_points = int(np.sum(profile.qualified))
    return rec


def rolling_scan(
    series: PriceSeries, window_length: int = 126, step: int = 5, config: FitConfig = FitConfig()
) -> ScanReport:
    """Profile every window [s, s + window_length - 1], s = 0, step, 2*step, ...

    A window's ``minima_count`` is the largest number of distinct (m, omega)
    minima inside the stylized box found at any critical time of its grid.
    Failing windows are recorded with an error message and the scan goes on.
    """
    if window_length > len(series):
        raise ValueError(f"window length {window_length} exceeds series length {len(series)}")
    if step < 1:
        raise ValueError("step must be >= 1")
    if window_length < config.min_window:
        raise ValueError(f"window length {window_length} below the minimum {config.min_window}")
    starts = range(0, len(series) - window_length + 1, step)
    tasks = [(series, s, s + window_length - 1, config) for s in starts]
    return ScanReport(window_length, step, _map(_scan_window, tasks, config.workers))
