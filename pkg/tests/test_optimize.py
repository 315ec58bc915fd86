import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpplfit import _kernels
from lpplfit.calibration import MW_BOX, MW_CLUSTER_TOLERANCE
from lpplfit.core import PhaseParams
from lpplfit.data import SynthSpec, synth_generate
from lpplfit.optimize import (
    PENALTY,
    LocalMinimum,
    OptimizerConfig,
    SearchBox,
    cluster_minima,
    local_minimize,
    multistart,
    start_points,
)

TRUTH = PhaseParams(179.0, 0.6, 9.0, 8.0, -1.0, 0.2, 1.0)


def rosenbrock(x):
    return 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2


def grid_basins_1d(f, lo, hi, n=10_000):
    # endpoint=False keeps the minima of cos(3x) off grid midpoints, so no ties
    x = np.linspace(lo, hi, n, endpoint=False)
    v = f(x)
    idx = [i for i in range(1, n - 1) if v[i] < v[i - 1] and v[i] < v[i + 1]]
    return x[idx]


def grid_basins_2d(f, box: SearchBox, n=400):
    xs = np.linspace(box.lower[0], box.upper[0], n)
    ys = np.linspace(box.lower[1], box.upper[1], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    V = f(X, Y)
    found = []
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            block = V[i - 1 : i + 2, j - 1 : j + 2].copy()
            c = block[1, 1]
            block[1, 1] = np.inf
            if np.all(c < block):
                found.append((xs[i], ys[j]))
    return np.array(found)


class TestSearchBox:
    def test_invalid(self):
        with pytest.raises(ValueError):
            SearchBox((0.0, 1.0), (1.0, 1.0))
        with pytest.raises(ValueError):
            SearchBox((0.0,), (1.0, 2.0))

    def test_contains(self):
        box = SearchBox((0.0, 0.0), (1.0, 2.0))
        assert box.contains([0.5, 2.0]) and not box.contains([1.5, 0.0])
        assert box.ndim == 2
        np.testing.assert_array_equal(box.width, [1.0, 2.0])


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(max_iterations=0), dict(x_tolerance=0.0), dict(f_tolerance=-1.0), dict(n_starts=0), dict(rng_seed=-1)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)

    def test_defaults(self):
        c = OptimizerConfig()
        assert (c.max_iterations, c.x_tolerance, c.f_tolerance, c.n_starts) == (2000, 1e-8, 1e-10, 20)


class TestLocalMinimize:
    def test_parabola(self):
        r = local_minimize(lambda x: (x[0] - 3.0) ** 2, [0.0])
        assert r.converged
        assert r.location[0] == pytest.approx(3.0, abs=1e-6)

    def test_rosenbrock(self):
        r = local_minimize(rosenbrock, [-1.2, 1.0])
        assert r.converged
        np.testing.assert_allclose(r.location, [1.0, 1.0], atol=1e-4)

    def test_iteration_cap(self):
        r = local_minimize(rosenbrock, [-1.2, 1.0], OptimizerConfig(max_iterations=5))
        assert not r.converged
        assert r.value <= rosenbrock(np.array([-1.2, 1.0]))

    def test_nonfinite_is_penalized(self):
        # undefined for x < 0; the search must stay on the defined side
        r = local_minimize(lambda x: math.sqrt(x[0]) if x[0] >= 0 else math.nan, [1.0], step=[2.0])
        assert r.value == pytest.approx(0.0, abs=1e-6)
        assert r.location[0] >= 0

    def test_all_penalty_start(self):
        r = local_minimize(lambda x: math.inf, [1.0, 1.0], step=[0.1, 0.1])
        assert not r.converged
        assert r.value >= PENALTY

    def test_f1_section_recovers_truth(self):
        s = synth_generate(SynthSpec(TRUTH, 150, 0.0, 0))
        args = (np.log(TRUTH.t_c - s.index), np.ascontiguousarray(s.log_price), 1e12)
        r = local_minimize(_kernels.f1_mw, [0.55, 8.7], step=0.05 * MW_BOX.width, args=args)
        assert r.converged
        assert r.location[0] == pytest.approx(0.6, abs=1e-4)
        assert r.location[1] == pytest.approx(9.0, abs=1e-4)

    def test_compiled_and_plain_agree(self):
        s = synth_generate(SynthSpec(TRUTH, 150, 0.01, 3))
        args = (np.log(TRUTH.t_c - s.index), np.ascontiguousarray(s.log_price), 1e12)
        step = 0.05 * MW_BOX.width
        a = local_minimize(_kernels.f1_mw, [0.5, 8.0], step=step, args=args)
        b = local_minimize(lambda x: _kernels.f1_mw(x, args), [0.5, 8.0], step=step)
        np.testing.assert_array_equal(a.location, b.location)
        assert a.value == b.value and a.n_evaluations == b.n_evaluations

    @settings(max_examples=50, deadline=None)
    @given(x0=st.lists(st.floats(-3, 3), min_size=2, max_size=2))
    def test_monotone_improvement(self, x0):
        r = local_minimize(rosenbrock, x0, step=[0.3, 0.3])
        assert r.value <= rosenbrock(np.array(x0))


class TestStartPoints:
    def test_inside_box_and_deterministic(self):
        box = SearchBox((0.1, 6.0), (0.9, 13.0))
        a = start_points(box, 50, 7)
        assert np.all((a >= box.lower) & (a <= box.upper))
        np.testing.assert_array_equal(a, start_points(box, 50, 7))
        assert not np.array_equal(a, start_points(box, 50, 8))

    def test_prefix_stable(self):
        # start i depends only on (seed, i): more starts extend, never reshuffle
        box = SearchBox((0.0,), (1.0,))
        np.testing.assert_array_equal(start_points(box, 5, 1), start_points(box, 20, 1)[:5])

    def test_streams_differ(self):
        box = SearchBox((0.0,), (1.0,))
        assert not np.array_equal(start_points(box, 5, 1, (0,)), start_points(box, 5, 1, (1,)))


class TestClustering:
    def test_merges_close_points(self):
        rs = [
            LocalMinimum(np.array([1.0]), 0.5),
            LocalMinimum(np.array([1.001]), 0.4),
            LocalMinimum(np.array([2.0]), 0.1),
        ]
        out = cluster_minima(rs, [0.01])
        assert [c.value for c in out] == [0.1, 0.4]
        assert [c.start_count for c in out] == [1, 2]
        assert out[1].location[0] == 1.001

    def test_order_independent(self):
        rng = np.random.default_rng(0)
        rs = [LocalMinimum(rng.integers(0, 4, 2) + 1e-3 * rng.random(2), float(rng.random())) for _ in range(40)]
        a = cluster_minima(rs, [0.1, 0.1])
        b = cluster_minima(rs[::-1], [0.1, 0.1])
        assert [(tuple(c.location), c.value, c.start_count) for c in a] == [
            (tuple(c.location), c.value, c.start_count) for c in b
        ]

    def test_drops_penalty(self):
        assert cluster_minima([LocalMinimum(np.array([0.0]), PENALTY)], [1.0]) == []


class TestMultistart:
    @pytest.mark.parametrize("seed", [0, 1, 2, 12345, 2**63])
    def test_convex_single_cluster(self, seed):
        box = SearchBox((-5.0, -5.0), (5.0, 5.0))
        out = multistart(lambda x: (x[0] - 1) ** 2 + 2 * (x[1] + 2) ** 2, box, OptimizerConfig(rng_seed=seed))
        assert len(out) == 1
        assert out[0].start_count == 20
        np.testing.assert_allclose(out[0].location, [1.0, -2.0], atol=1e-4)

    def test_cos3x_matches_grid_scan(self):
        lo, hi = 0.0, 2 * math.pi
        basins = grid_basins_1d(lambda x: np.cos(3 * x), lo, hi)
        box = SearchBox((lo,), (hi,))
        cfg = OptimizerConfig(rng_seed=4, cluster_tolerance=(0.05,))
        out = [c for c in multistart(lambda x: math.cos(3 * x[0]), box, cfg) if box.contains(c.location)]
        assert len(out) == len(basins) == 3
        found = np.sort([c.location[0] for c in out])
        np.testing.assert_allclose(found, basins, atol=0.05)
        # pi/3 and pi are both among the minima
        assert np.min(np.abs(found - math.pi / 3)) < 1e-3
        assert np.min(np.abs(found - math.pi)) < 1e-3

    def test_2d_clusters_match_grid_basins(self):
        box = SearchBox((0.3, 0.3), (2 * math.pi - 0.3, 2 * math.pi - 0.3))

        def f(x, y):
            return np.cos(3 * x) + np.cos(3 * y) + 0.05 * (x + y)

        basins = grid_basins_2d(f, box)
        tol = (0.1, 0.1)
        # basin separation 2*pi/3 is far above 2x the tolerance
        cfg = OptimizerConfig(n_starts=300, rng_seed=11, cluster_tolerance=tol)
        out = multistart(lambda x: float(f(x[0], x[1])), box, cfg)
        inside = [c for c in out if box.contains(c.location)]
        assert len(inside) == len(basins)
        for b in basins:
            assert min(np.max(np.abs(c.location - b)) for c in inside) < 0.05

    def test_determinism(self):
        s = synth_generate(SynthSpec(TRUTH, 150, 0.01, 5))
        args = (np.log(TRUTH.t_c - s.index), np.ascontiguousarray(s.log_price), 1e12)
        cfg = OptimizerConfig(rng_seed=99, cluster_tolerance=MW_CLUSTER_TOLERANCE)
        a = multistart(_kernels.f1_mw, MW_BOX, cfg, args=args)
        b = multistart(_kernels.f1_mw, MW_BOX, cfg, args=args)
        assert [(c.location.tobytes(), c.value, c.start_count) for c in a] == [
            (c.location.tobytes(), c.value, c.start_count) for c in b
        ]

    def test_f1_single_cluster_in_box(self):
        s = synth_generate(SynthSpec(TRUTH, 150, 0.0, 0))
        args = (np.log(TRUTH.t_c - s.index), np.ascontiguousarray(s.log_price), 1e12)
        out = multistart(_kernels.f1_mw, MW_BOX, OptimizerConfig(cluster_tolerance=MW_CLUSTER_TOLERANCE), args=args)
        inside = [c for c in out if MW_BOX.contains(c.location) and c.value <= 10 * out[0].value]
        assert len(inside) == 1
        np.testing.assert_allclose(inside[0].location, [0.6, 9.0], atol=1e-4)

    def test_seed_sensitivity(self):
        s = synth_generate(SynthSpec(TRUTH, 150, 0.0, 0))
        args = (np.log(TRUTH.t_c - s.index), np.ascontiguousarray(s.log_price), 1e12)
        best = [
            multistart(_kernels.f1_mw, MW_BOX, OptimizerConfig(rng_seed=seed, cluster_tolerance=MW_CLUSTER_TOLERANCE), args=args)[0].value
            for seed in range(10)
        ]
        assert (max(best) - min(best)) / (1 + min(best)) < 1e-8
