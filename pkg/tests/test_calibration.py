import math

import numpy as np
import pytest

from lpplfit.calibration import (
    CalibrationError,
    FitConfig,
    cross_section,
    default_workers,
    f1,
    fit,
    grid_local_minima,
    grid_local_minima_2d,
    legacy_fit,
    minimize_mw,
    profile_tc,
    rolling_scan,
    s1,
    slaved_params,
    tc_grid,
)
from lpplfit.core import DomainError, PhaseParams, eval_lppl_phase
from lpplfit.data import FitWindow, PriceSeries, SynthSpec, synth_generate
from lpplfit.linear import RankDeficiencyError, cost_F

TRUTH = PhaseParams(179.0, 0.6, 9.0, 8.0, -1.0, 0.2, 1.0)
# a 40-day horizon still brackets the truth at t2 + 30 and keeps tests quick
QUICK = FitConfig(tc_horizon=40.0)


@pytest.fixture(scope="module")
def clean():
    return synth_generate(SynthSpec(TRUTH, 150, 0.0, 0))


@pytest.fixture(scope="module")
def noisy():
    return synth_generate(SynthSpec(TRUTH, 150, 0.01, 11))


def whole(series):
    return FitWindow.whole(series)


class TestF1:
    def test_zero_at_truth(self, clean):
        v = f1(clean, whole(clean), 179.0, 0.6, 9.0)
        assert v <= 1e-16 * float(clean.log_price @ clean.log_price)

    def test_domain_error(self, clean):
        with pytest.raises(DomainError):
            f1(clean, whole(clean), 149.0, 0.6, 9.0)

    def test_rank_deficiency_is_hard_error(self, clean):
        with pytest.raises(RankDeficiencyError):
            f1(clean, whole(clean), 179.0, 0.0, 9.0)

    @pytest.mark.parametrize("t_c, m, omega", [(160.0, 0.3, 7.0), (200.0, 0.8, 12.5), (179.0, 0.6, 9.0)])
    def test_below_phase_grid(self, noisy, t_c, m, omega):
        w = whole(noisy)
        v = f1(noisy, w, t_c, m, omega)
        grid = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        assert min(s1(noisy, w, t_c, m, omega, phi) for phi in grid) >= v * (1 - 1e-12)

    def test_equals_cost_at_slaved_parameters(self, noisy):
        w = whole(noisy)
        times, y = noisy.window(w)
        for t_c, m, omega in [(160.0, 0.3, 7.0), (179.0, 0.6, 9.0), (230.0, 0.85, 6.2)]:
            p = slaved_params(times, y, t_c, m, omega)
            v = cost_F(times, y, p.t_c, p.m, p.omega, p.A, p.B, p.C1, p.C2)
            assert v == pytest.approx(f1(noisy, w, t_c, m, omega), rel=1e-12)

    def test_subwindow(self, noisy):
        w = FitWindow(20, 119)
        times, y = noisy.window(w)
        assert times[0] == 20.0 and times[-1] == 119.0
        assert f1(noisy, w, 130.0, 0.5, 8.0) > 0
        with pytest.raises(ValueError):
            f1(noisy, FitWindow(0, 400), 500.0, 0.5, 8.0)


class TestMinimizeMw:
    def test_truth(self, clean):
        r = minimize_mw(clean, whole(clean), 179.0)
        assert r.m_hat == pytest.approx(0.6, abs=1e-4)
        assert r.omega_hat == pytest.approx(9.0, abs=1e-3)
        assert r.minima_count == 1
        assert r.f2_value == pytest.approx(f1(clean, whole(clean), 179.0, r.m_hat, r.omega_hat), rel=1e-12, abs=1e-30)

    def test_displaced_tc_is_worse(self, clean):
        w = whole(clean)
        assert minimize_mw(clean, w, 189.0).f2_value > minimize_mw(clean, w, 179.0).f2_value

    def test_f2_is_min_over_starts(self, noisy):
        w = whole(noisy)
        r = minimize_mw(noisy, w, 175.0)
        assert all(c.value >= r.f2_value for c in r.clusters)
        assert r.minima_count <= 3

    def test_domain(self, clean):
        with pytest.raises(DomainError):
            minimize_mw(clean, whole(clean), 149.0)


class TestGrid:
    def test_default_grid(self):
        g = tc_grid(149.0, FitConfig())
        assert g[0] == 150.0 and g[-1] == 239.0 and g.size == 90

    def test_custom_step(self):
        g = tc_grid(10.0, FitConfig(tc_first=2.0, tc_horizon=5.0, tc_step=0.5))
        np.testing.assert_array_equal(g, [12.0, 12.5, 13.0, 13.5, 14.0, 14.5, 15.0])

    @pytest.mark.parametrize(
        "values, expected",
        [
            ([3, 1, 2], [1]),
            ([1, 2, 3], []),
            ([3, 2, 1], []),
            ([3, 1, 1, 2], [1]),
            ([3, 1, 1, 0], []),
            ([5, 1, 4, 0, 3], [1, 3]),
            ([1, 1, 1], []),
            ([2, np.nan, 1, 3], []),  # a failed neighbour cannot confirm a minimum
            ([2, 3, 1, 3, np.nan], [2]),
        ],
    )
    def test_grid_local_minima(self, values, expected):
        assert grid_local_minima(np.array(values, dtype=float)) == expected

    def test_grid_local_minima_2d(self):
        v = np.full((5, 5), 10.0)
        v[1, 1] = 1.0
        v[3, 3] = 2.0
        v[2, 2] = 2.0  # touches both others diagonally but is not below them
        v[0, 4] = 0.0  # border cells never count
        assert grid_local_minima_2d(v) == [(1, 1)]

    def test_config_validation(self):
        for kwargs in (dict(tc_first=0.0), dict(tc_first=50.0, tc_horizon=10.0), dict(tc_step=0.0), dict(minima_cost_factor=0.5), dict(workers=0)):
            with pytest.raises(ValueError):
                FitConfig(**kwargs)

    def test_default_workers(self, monkeypatch):
        monkeypatch.setenv("LPPLFIT_WORKERS", "3")
        assert default_workers() == 3
        monkeypatch.setenv("LPPLFIT_WORKERS", "junk")
        assert default_workers() == 1
        monkeypatch.delenv("LPPLFIT_WORKERS")
        assert default_workers() == 1


@pytest.fixture(scope="module")
def profile(clean):
    return profile_tc(clean, whole(clean), QUICK)


@pytest.fixture(scope="module")
def result(noisy):
    return fit(noisy, whole(noisy), QUICK)


class TestProfile:
    def test_minimum_at_truth(self, profile):
        assert abs(profile.tc_grid[profile.best_index] - 179.0) <= 1.0
        assert profile.best_index in profile.local_minima

    def test_shapes_and_invariants(self, profile, clean):
        n = profile.tc_grid.size
        assert n == 40
        for arr in (profile.f2_values, profile.m_hat, profile.omega_hat, profile.qualified, profile.minima_counts):
            assert arr.shape == (n,)
        assert np.all(profile.f2_values >= 0)
        assert np.all(profile.tc_grid > clean.index[-1])
        assert profile.qualified[profile.best_index]
        assert len(list(profile.rows())) == n

    def test_parallel_identical(self, clean):
        cfg = FitConfig(tc_horizon=6.0)
        a = profile_tc(clean, whole(clean), cfg)
        b = profile_tc(clean, whole(clean), FitConfig(tc_horizon=6.0, workers=2))
        for name in ("tc_grid", "f2_values", "m_hat", "omega_hat", "qualified", "minima_counts"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
        assert a.local_minima == b.local_minima

    def test_exponential_is_not_a_bubble(self, clean):
        rng = np.random.default_rng(5)
        t = np.arange(150.0)
        y = 5.0 + 0.002 * t + 0.01 * rng.standard_normal(150)
        expo = PriceSeries.from_log_prices(clean.dates, y)
        p = profile_tc(expo, whole(expo))
        bubble = profile_tc(synth_generate(SynthSpec(TRUTH, 150, 0.01, 5)), whole(clean))
        qualified_costs = p.f2_values[p.qualified]
        assert qualified_costs.size == 0 or qualified_costs.min() / np.nanmin(bubble.f2_values) > 10


class TestFit:
    def test_recovers(self, result):
        p = result.params
        assert abs(p.t_c - 179.0) < 5 and abs(p.m - 0.6) < 0.1 and abs(p.omega - 9.0) < 0.5
        assert result.qualification.qualified
        assert result.minima_count == 1

    def test_cost_matches_params(self, result, noisy):
        times, y = noisy.window(whole(noisy))
        p = result.params
        recomputed = cost_F(times, y, p.t_c, p.m, p.omega, p.A, p.B, p.C1, p.C2)
        assert result.cost == pytest.approx(recomputed, rel=1e-12)
        assert float(result.diagnostics @ result.diagnostics) == pytest.approx(result.cost, rel=1e-9)

    def test_refinement_never_worse_than_grid(self, result):
        assert result.cost <= np.nanmin(result.profile.f2_values)

    def test_phase_view(self, result):
        ph = result.phase_view
        assert ph.C == pytest.approx(math.hypot(result.params.C1, result.params.C2), rel=1e-15)
        assert 0 <= ph.phi < 2 * math.pi

    def test_constant_series_unqualified(self, clean):
        flat = PriceSeries(clean.dates, np.full(150, 100.0))
        r = fit(flat, whole(flat), FitConfig(tc_horizon=10.0))
        assert not r.qualification.qualified
        assert r.params.B == 0.0
        assert "B" in {v.name for v in r.qualification.violations}

    def test_legacy_agrees_on_clean(self, clean):
        new = fit(clean, whole(clean), QUICK)
        old = legacy_fit(clean, whole(clean), QUICK)
        assert abs(new.params.t_c - old.params.t_c) <= 0.5
        assert abs(new.params.m - old.params.m) <= 1e-3
        assert abs(new.params.omega - old.params.omega) <= 1e-2
        assert new.cost <= old.cost + 1e-9
        assert old.profile is None
        assert old.phase_view.C >= 0

    def test_seeded_determinism(self, noisy):
        cfg = FitConfig(tc_first=26.0, tc_horizon=34.0)
        a = fit(noisy, whole(noisy), cfg.with_seed(5))
        b = fit(noisy, whole(noisy), cfg.with_seed(5))
        assert a.params == b.params and a.cost == b.cost and a.n_evaluations == b.n_evaluations


class TestCrossSection:
    def test_f1_mw_plane(self, clean):
        xs = cross_section(clean, whole(clean), ("m", "omega"), {"tc": 179.0})
        assert xs.values.shape == (41, 71)
        assert grid_local_minima_2d(xs.values) == [(25, 30)]  # m = 0.6, omega = 9
        assert xs.first[25] == pytest.approx(0.6) and xs.second[30] == pytest.approx(9.0)
        assert len(list(xs.rows())) == 41 * 71

    def test_s1_needs_phase(self, clean):
        with pytest.raises(ValueError):
            cross_section(clean, whole(clean), ("m", "omega"), {"tc": 179.0}, cost="S1")
        xs = cross_section(clean, whole(clean), ("omega", "phi"), {"tc": 179.0, "m": 0.6}, cost="S1")
        assert xs.values.shape == (71, 72)

    def test_invalid_tc_is_nan(self, clean):
        xs = cross_section(clean, whole(clean), ("tc", "m"), {"omega": 9.0}, grids={"tc": np.array([140.0, 160.0, 179.0])})
        assert np.all(np.isnan(xs.values[0])) and np.all(np.isfinite(xs.values[1:]))

    @pytest.mark.parametrize("axes", [("m", "m"), ("m", "phi"), ("x", "m")])
    def test_bad_axes(self, clean, axes):
        with pytest.raises(ValueError):
            cross_section(clean, whole(clean), axes, {"tc": 179.0, "omega": 9.0})


class TestRollingScan:
    def test_records_and_histogram(self, noisy):
        cfg = FitConfig(tc_horizon=5.0)
        rep = rolling_scan(noisy, window_length=120, step=15, config=cfg)
        assert [r.start_index for r in rep.records] == [0, 15, 30]
        assert all(r.end_index - r.start_index == 119 for r in rep.records)
        assert sum(rep.minima_histogram().values()) == 3
        assert all(r.minima_count >= 0 for r in rep.records)

    def test_invalid(self, noisy):
        with pytest.raises(ValueError):
            rolling_scan(noisy, window_length=500)
        with pytest.raises(ValueError):
            rolling_scan(noisy, window_length=20)
        with pytest.raises(ValueError):
            rolling_scan(noisy, window_length=100, step=0)

    def test_parallel_identical(self, noisy):
        cfg = FitConfig(tc_horizon=3.0)
        a = rolling_scan(noisy, 120, 15, cfg)
        b = rolling_scan(noisy, 120, 15, FitConfig(tc_horizon=3.0, workers=2))
        assert [vars(r) for r in a.records] == [vars(r) for r in b.records]


def test_calibration_error_when_everything_fails(clean, monkeypatch):
    import lpplfit.calibration as cal

    monkeypatch.setattr(cal, "_profile_point", lambda task: None)
    with pytest.raises(CalibrationError):
        profile_tc(clean, whole(clean), FitConfig(tc_horizon=3.0))
