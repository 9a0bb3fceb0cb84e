"""Cohort generator: distributional checks, protocol invariants, determinism."""

import math

import numpy as np
import pytest

from snpdesign.design import HazardModel, TrajectoryModel
from snpdesign.simulate import (
    Cohort,
    InvalidCovarianceError,
    SimConfig,
    TimeGrid,
    discretize_observation,
    sample_censoring,
    sample_genotype,
    sample_random_effects,
    simulate_cohort,
    simulate_longitudinal,
    trajectory_value,
    write_cohort,
)


def reference_config(n=1000, seed=20240809, replicate=0, tau=10.0, scenario="S1", **over):
    trajectory = TrajectoryModel(
        fixed_coeffs=over.pop("fixed_coeffs", (8.5, 0.1)),
        snp_effect=over.pop("snp_effect", 0.3),
        random_cov=over.pop("random_cov", np.array([[2.0, -0.1], [-0.1, 0.1]])),
        error_var=over.pop("error_var", 0.7),
    )
    hazard = HazardModel(
        weibull_scale=over.pop("weibull_scale", 0.01),
        weibull_shape=over.pop("weibull_shape", 1.1),
        direct_effect=over.pop("direct_effect", 0.1),
        association=over.pop("association", 0.25),
    )
    return SimConfig(
        n_subjects=n,
        trajectory=trajectory,
        hazard=hazard,
        maf=over.pop("maf", 0.3),
        grid=TimeGrid.visit_scenario(scenario, tau),
        seed=seed,
        replicate=replicate,
        **over,
    )


class TestSampleGenotype:
    def test_hwe_frequencies(self):
        rng = np.random.default_rng(1)
        g = sample_genotype(0.3, rng, size=100_000)
        for k, p_k in enumerate((0.49, 0.42, 0.09)):
            se = math.sqrt(p_k * (1 - p_k) / 100_000)
            assert abs((g == k).mean() - p_k) < 3 * se

    def test_moments(self):
        rng = np.random.default_rng(2)
        g = sample_genotype(0.3, rng, size=100_000)
        assert abs(g.mean() - 0.6) < 3 * math.sqrt(0.42 / 100_000)
        assert abs(g.var() - 0.42) < 0.01

    def test_rare_allele_limit(self):
        rng = np.random.default_rng(3)
        g = sample_genotype(1e-9, rng, size=5000)
        assert np.all(g == 0)

    def test_invalid_maf(self):
        rng = np.random.default_rng(4)
        with pytest.raises(ValueError):
            sample_genotype(0.0, rng)


class TestSampleRandomEffects:
    def test_covariance_recovery(self):
        rng = np.random.default_rng(5)
        cov = np.array([[2.0, -0.1], [-0.1, 0.1]])
        draws = sample_random_effects(cov, rng, size=100_000)
        sample_cov = np.cov(draws.T)
        # 3 sigma bounds for normal covariance entries at this sample size.
        for i in range(2):
            for j in range(2):
                se = math.sqrt((cov[i, i] * cov[j, j] + cov[i, j] ** 2) / 100_000)
                assert abs(sample_cov[i, j] - cov[i, j]) < 3 * se

    def test_tiny_variance_limit(self):
        rng = np.random.default_rng(6)
        draws = sample_random_effects(np.eye(2) * 1e-12, rng, size=100)
        assert np.max(np.abs(draws)) < 1e-4

    def test_three_dimensional(self):
        rng = np.random.default_rng(7)
        draws = sample_random_effects(np.diag([1.0, 0.3, 0.01]), rng, size=1000)
        assert draws.shape == (1000, 3)

    def test_invalid_covariance(self):
        rng = np.random.default_rng(8)
        with pytest.raises(InvalidCovarianceError):
            sample_random_effects(np.array([[1.0, 2.0], [2.0, 1.0]]), rng)


class TestTrajectoryValue:
    def make(self, coeffs, beta_g):
        cov = np.diag([1.0] * min(len(coeffs), 2))
        return TrajectoryModel(coeffs, beta_g, cov, 0.7)

    def test_at_zero(self):
        m = self.make((8.5, 0.1), 0.3)
        assert trajectory_value(m, np.zeros(2), 1, 0.0) == pytest.approx(8.8)

    def test_linear_combination(self):
        m = self.make((8.5, 0.1), 0.3)
        got = trajectory_value(m, np.array([0.5, -0.1]), 0, 2.0)
        assert got == pytest.approx(9.0)

    def test_quadratic_with_snp(self):
        m = self.make((7.5, -0.5, 0.1), 0.2)
        got = trajectory_value(m, np.zeros(2), 2, 1.0)
        assert got == pytest.approx(7.5, abs=1e-12)

    def test_vector_times(self):
        m = self.make((1.0, 2.0), 0.0)
        got = trajectory_value(m, np.zeros(2), 0, np.array([0.0, 1.0, 2.0]))
        assert np.allclose(got, [1.0, 3.0, 5.0])


class TestSimulateLongitudinal:
    def test_noise_variance(self):
        m = TrajectoryModel((8.5, 0.1), 0.3, np.eye(2), 0.7)
        rng = np.random.default_rng(9)
        times = np.zeros(100_000)  # many draws at a single time
        y = simulate_longitudinal(m, np.zeros(2), 0, times, rng)
        resid = y - 8.5
        assert abs(resid.var() - 0.7) < 3 * 0.7 * math.sqrt(2 / 100_000)
        assert abs(resid.mean()) < 3 * math.sqrt(0.7 / 100_000)

    def test_noise_free_limit(self):
        m = TrajectoryModel((8.5, 0.1), 0.3, np.eye(2), 1e-30)
        rng = np.random.default_rng(10)
        t = np.array([0.0, 1.0, 2.0])
        y = simulate_longitudinal(m, np.zeros(2), 1, t, rng)
        assert np.allclose(y, 8.8 + 0.1 * t, atol=1e-9)

    def test_sd_interpretation_switch(self):
        m = TrajectoryModel((0.0,), 0.0, np.eye(1), 0.7)
        rng = np.random.default_rng(11)
        y = simulate_longitudinal(m, np.zeros(1), 0, np.zeros(50_000), rng, noise_scale_is_sd=True)
        assert abs(y.std() - 0.7) < 0.01


class TestSampleCensoring:
    def test_support_and_mean(self):
        rng = np.random.default_rng(12)
        c = np.array([sample_censoring(10.0, rng) for _ in range(20_000)])
        assert c.min() >= 5.0 and c.max() <= 10.0
        assert abs(c.mean() - 7.5) < 3 * (5.0 / math.sqrt(12)) / math.sqrt(20_000)

    def test_short_followup(self):
        rng = np.random.default_rng(13)
        assert sample_censoring(1e-9, rng) <= 1e-9

    def test_invalid(self):
        rng = np.random.default_rng(14)
        with pytest.raises(ValueError):
            sample_censoring(0.0, rng)


class TestDiscretizeObservation:
    grid = np.arange(0.5, 10.0 + 1e-9, 0.5)

    def test_bracketing(self):
        d = discretize_observation(3.2, self.grid)
        assert (d.lower, d.upper, d.clamped) == (3.0, 3.5, False)

    def test_exact_grid_point(self):
        d = discretize_observation(4.0, self.grid)
        assert (d.lower, d.upper, d.clamped) == (3.5, 4.0, False)

    def test_beyond_grid_clamps(self):
        d = discretize_observation(11.0, self.grid)
        assert d.upper == 10.0 and d.clamped

    def test_before_first_assessment(self):
        d = discretize_observation(0.2, self.grid)
        assert (d.lower, d.upper) == (0.0, 0.5)


class TestTimeGrid:
    def test_scenarios_shape(self):
        s1 = TimeGrid.visit_scenario("S1", 10.0)
        assert len(s1.longitudinal_times) == 41 and len(s1.survival_times) == 20
        s5 = TimeGrid.visit_scenario("S5", 10.0)
        assert len(s5.longitudinal_times) == 5 and len(s5.survival_times) == 3
        for name in ("S1", "S2", "S3", "S4", "S5"):
            g = TimeGrid.visit_scenario(name, 10.0)
            assert g.survival_times[-1] == pytest.approx(10.0)
            assert g.longitudinal_times[0] == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(np.array([0.0, 1.0]), np.array([1.0, 0.5]), 10.0)
        with pytest.raises(ValueError):
            TimeGrid(np.array([0.5, 1.0]), np.array([1.0, 10.0]), 10.0)
        with pytest.raises(ValueError):
            TimeGrid(np.array([0.0, 1.0]), np.array([1.0, 9.0]), 10.0)


class TestSimulateCohort:
    def test_single_subject_reproducible(self):
        cfg = reference_config(n=1)
        a = simulate_cohort(cfg)
        b = simulate_cohort(cfg)
        assert a.n_subjects == 1
        assert np.array_equal(a.measurements, b.measurements, equal_nan=True)
        assert a.latent_time[0] == b.latent_time[0]

    def test_bit_identical_across_runs(self):
        cfg = reference_config(n=200)
        a, b = simulate_cohort(cfg), simulate_cohort(cfg)
        for field in ("snp", "random_effects", "latent_time", "censor_time",
                      "observed_time", "event", "interval_lower", "interval_upper"):
            assert np.array_equal(getattr(a, field), getattr(b, field))
        assert np.array_equal(a.measurements, b.measurements, equal_nan=True)

    def test_replicates_differ(self):
        a = simulate_cohort(reference_config(n=100, replicate=0))
        b = simulate_cohort(reference_config(n=100, replicate=1))
        assert not np.array_equal(a.latent_time, b.latent_time)

    def test_observed_time_semantics(self):
        c = simulate_cohort(reference_config(n=400))
        finite = np.isfinite(c.latent_time)
        assert np.all(c.observed_time == np.minimum(np.where(finite, c.latent_time, np.inf), c.censor_time))
        assert np.all(c.event == (c.latent_time <= c.censor_time))
        assert np.all(c.observed_time <= 10.0 + 1e-12)

    def test_measurements_respect_observed_time(self):
        c = simulate_cohort(reference_config(n=300))
        times = c.config.grid.longitudinal_times
        for i in range(0, 300, 17):
            rec = c.subject(i)
            assert all(t <= rec.observed_time for t, _ in rec.measurements)
            k = int(c.n_measurements[i])
            if k < len(times):
                assert times[k] > rec.observed_time
                assert np.all(np.isnan(c.measurements[i, k:]))

    def test_interval_brackets_observed_time(self):
        c = simulate_cohort(reference_config(n=300))
        grid = c.config.grid.survival_times
        assert np.all(c.interval_lower < c.observed_time + 1e-12)
        assert np.all(c.observed_time <= c.interval_upper + 1e-12)
        # adjacency on the assessment grid
        for i in range(0, 300, 23):
            ui = np.searchsorted(grid, c.interval_upper[i])
            lo = grid[ui - 1] if ui > 0 else 0.0
            assert c.interval_lower[i] == pytest.approx(lo)

    def test_event_fraction_increases_with_followup(self):
        frac = {}
        for tau in (5.0, 10.0):
            events = [
                simulate_cohort(reference_config(n=1000, replicate=r, tau=tau)).n_events
                for r in range(12)
            ]
            frac[tau] = np.mean(events) / 1000.0
        assert frac[5.0] < frac[10.0]
        assert abs(frac[5.0] - 0.35) < 0.02
        assert abs(frac[10.0] - 0.61) < 0.02

    def test_weibull_survival_matches_closed_form(self):
        # No trajectory association and no direct effect: latent times are Weibull.
        cfg = reference_config(n=100_000, association=0.0, direct_effect=0.0, seed=31)
        c = simulate_cohort(cfg)
        lam, v = 0.01, 1.1
        t = np.sort(c.latent_time[np.isfinite(c.latent_time)])
        n = c.n_subjects
        # KS distance on [0, 100]: empirical CDF steps only at finite times.
        cdf = 1.0 - np.exp(-lam * t**v)
        ecdf_hi = np.arange(1, len(t) + 1) / n
        ecdf_lo = np.arange(0, len(t)) / n
        ks = max(np.max(np.abs(ecdf_hi - cdf)), np.max(np.abs(ecdf_lo - cdf)))
        assert ks < 0.02

    def test_export_files(self, tmp_path):
        c = simulate_cohort(reference_config(n=25))
        long_path, surv_path = write_cohort(c, tmp_path)
        long_lines = open(long_path).read().splitlines()
        surv_lines = open(surv_path).read().splitlines()
        assert long_lines[0] == "id,time,value"
        assert surv_lines[0] == "id,snp,t_event_recorded,event,t_L,t_U"
        assert len(surv_lines) == 26
        assert len(long_lines) == 1 + int(c.n_measurements.sum())
        # export is deterministic
        write_cohort(c, tmp_path, basename="again")
        assert open(f"{tmp_path}/again_survival.csv").read() == open(surv_path).read()
