"""Nelder-Mead local search and a seeded multi-start driver with clustering.

The simplex loop is written once. Objectives compiled with numba run through a
compiled copy of the loop (``func(x, args)`` calling convention); any other
Python callable ``objective(x)`` runs through the interpreted copy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba.core.registry import CPUDispatcher

from ._drivers import COMPILED_DRIVERS
from ._simplex import PENALTY, nelder_mead, nelder_mead_compiled

# initial simplex edge as a fraction of the search box width
SIMPLEX_SCALE = 0.05


@dataclass(frozen=True)
class SearchBox:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper bounds differ in dimension")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValueError(f"invalid box: lower {lo} is not below upper {hi}")

    @property
    def ndim(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float) - np.asarray(self.lower, dtype=float)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 2000
    x_tolerance: float = 1e-8
    f_tolerance: float = 1e-10
    n_starts: int = 20
    rng_seed: int = 0
    cluster_tolerance: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not (self.x_tolerance > 0 and self.f_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")


@dataclass
class LocalMinimum:
    location: np.ndarray
    value: float
    start_count: int = 1
    converged: bool = True
    n_evaluations: int = 0
    start: np.ndarray | None = field(default=None, repr=False)


def _call_plain(x, objective):
    return float(objective(x))


def _default_step(x0: np.ndarray) -> np.ndarray:
    return np.where(x0 != 0, SIMPLEX_SCALE * np.abs(x0), 0.00025)


def local_minimize(objective, x0, config: OptimizerConfig = OptimizerConfig(), step=None, args=None) -> LocalMinimum:
    """Nelder-Mead from ``x0``.

    ``objective`` is either a plain callable of one vector, or a numba-compiled
    function ``objective(x, args)``. Non-finite values count as a 1e300 penalty.
    ``step`` is the per-dimension edge of the initial simplex.
    """
    x0 = np.array(x0, dtype=float).ravel()
    step = _default_step(x0) if step is None else np.broadcast_to(np.asarray(step, dtype=float), x0.shape).copy()
    settings = (config.max_iterations, config.x_tolerance, config.f_tolerance)
    driver = COMPILED_DRIVERS.get(objective) if isinstance(objective, CPUDispatcher) else None
    if driver is not None:
        x, fx, nit, nfev, converged = driver(args, x0, step, *settings)
    elif isinstance(objective, CPUDispatcher):
        x, fx, nit, nfev, converged = nelder_mead_compiled(objective, args, x0, step, *settings)
    else:
        x, fx, nit, nfev, converged = nelder_mead(_call_plain, objective, x0, step, *settings)
    return LocalMinimum(
        location=np.asarray(x), value=float(fx), converged=bool(converged), n_evaluations=int(nfev), start=x0
    )


def start_points(box: SearchBox, n_starts: int, seed: int, stream: tuple[int, ...] = ()) -> np.ndarray:
    """Uniform draws in ``box``; start ``i`` uses its own PCG64 stream keyed by (stream..., i)."""
    lo = np.asarray(box.lower, dtype=float)
    width = box.width
    points = np.empty((n_starts, box.ndim))
    for i in range(n_starts):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(*stream, i))
        rng = np.random.Generator(np.random.PCG64(ss))
        points[i] = lo + width * rng.random(box.ndim)
    return points


def cluster_minima(results: list[LocalMinimum], tolerance) -> list[LocalMinimum]:
    """Merge minima closer than ``tolerance`` in every dimension, keeping the best of each group.

    Input order does not matter: results are sorted by value, then location.
    """
    tol = np.asarray(tolerance, dtype=float)
    ordered = sorted(
        (r for r in results if np.isfinite(r.value) and r.value < PENALTY),
        key=lambda r: (r.value, tuple(r.location)),
    )
    clusters: list[LocalMinimum] = []
    for r in ordered:
        for c in clusters:
            if np.all(np.abs(r.location - c.location) < tol):
                c.start_count += 1
                c.n_evaluations += r.n_evaluations
                break
        else:
            clusters.append(
                LocalMinimum(
                    location=r.location.copy(),
                    value=r.value,
                    start_count=1,
                    converged=r.converged,
                    n_evaluations=r.n_evaluations,
                    start=r.start,
                )
            )
    return clusters


def multistart(
    objective, box: SearchBox, config: OptimizerConfig = OptimizerConfig(), args=None, stream: tuple[int, ...] = ()
) -> list[LocalMinimum]:
    """Seeded multi-start simplex search; distinct minima sorted by value.

    Total objective evaluations are the sum of ``n_evaluations`` over the
    returned clusters plus those of starts that never left the penalty region,
    which are dropped.
    """
    tolerance = config.cluster_tolerance
    if tolerance is None:
        tolerance = 0.01 * box.width
    step = SIMPLEX_SCALE * box.width
    results = [
        local_minimize(objective, x0, config, step=step, args=args)
        for x0 in start_points(box, config.n_starts, config.rng_seed, stream)
    ]
    return cluster_minima(results, tolerance)
