"""Cox partial likelihood: textbook oracles, invariances, counting process."""

import math

import numpy as np
import pytest

from snpdesign.cox import (
    CollinearCovariatesError,
    build_counting_process,
    counting_process_data,
    fit_cox,
)
from snpdesign.design import HazardModel, TrajectoryModel, normal_cdf
from snpdesign.lmm import adjust_responses, fit_lmm
from snpdesign.simulate import SimConfig, TimeGrid, simulate_cohort


def two_group_exponential(n, log_hr, rng, censor_at=2.0):
    """Right-censored exponential data as simple (0, t] rows."""
    group = (rng.random(n) < 0.5).astype(float)
    t = rng.exponential(1.0 / np.exp(log_hr * group))
    event = t <= censor_at
    t = np.minimum(t, censor_at)
    return counting_process_data(
        np.arange(n), np.zeros(n), t, event, group[:, None], ("group",)
    )


def cohort_for(n=400, seed=55, replicate=0, association=0.25, direct=0.1, snp_effect=0.3):
    trajectory = TrajectoryModel(
        (8.5, 0.1), snp_effect, np.array([[2.0, -0.1], [-0.1, 0.1]]), 0.7
    )
    hazard = HazardModel(0.01, 1.1, direct, association)
    cfg = SimConfig(n, trajectory, hazard, 0.3, TimeGrid.visit_scenario("S1", 10.0), seed, replicate)
    return simulate_cohort(cfg)


class TestFitCox:
    def test_recovers_exponential_log_hazard_ratio(self):
        # Oracle: with exponential data the hazard ratio equals the rate
        # ratio, so the true coefficient is log_hr by construction.
        rng = np.random.default_rng(42)
        estimates = []
        for _ in range(30):
            data = two_group_exponential(2000, 0.5, rng)
            fit = fit_cox(data)
            assert fit.converged
            estimates.append(fit.coef[0])
        assert abs(np.mean(estimates) - 0.5) < 0.05

    def test_null_rejection_rate(self):
        rng = np.random.default_rng(43)
        rejections = 0
        for _ in range(1000):
            data = two_group_exponential(200, 0.0, rng)
            fit = fit_cox(data)
            rejections += fit.p_values[0] <= 0.05
        assert abs(rejections / 1000 - 0.05) < 0.02

    def test_row_permutation_bit_identical(self):
        cohort = cohort_for(n=150)
        data = build_counting_process(cohort, "none")
        rng = np.random.default_rng(3)
        perm = rng.permutation(data.n_rows)
        shuffled = counting_process_data(
            data.subject[perm],
            data.start[perm],
            data.stop[perm],
            data.event[perm],
            data.covariates[perm],
            data.covariate_names,
        )
        a, b = fit_cox(data), fit_cox(shuffled)
        assert a.coef[0] == b.coef[0]
        assert a.se[0] == b.se[0]
        assert a.loglik == b.loglik

    def test_loglik_nondecreasing(self):
        cohort = cohort_for(n=300, seed=77)
        fit = fit_cox(build_counting_process(cohort, "true-trajectory"))
        path = np.asarray(fit.loglik_path)
        assert np.all(np.diff(path) >= -1e-9)

    def test_p_value_definition(self):
        cohort = cohort_for(n=300, seed=78)
        fit = fit_cox(build_counting_process(cohort, "none"))
        for z, p in zip(fit.wald_z, fit.p_values):
            assert abs(p - 2.0 * (1.0 - normal_cdf(abs(z)))) < 1e-12

    def test_no_events_rejected(self):
        data = counting_process_data(
            [0, 1], [0.0, 0.0], [1.0, 1.0], [False, False], [[0.0], [1.0]], ("x",)
        )
        with pytest.raises(ValueError):
            fit_cox(data)

    def test_collinear_covariates(self):
        rng = np.random.default_rng(5)
        g = (rng.random(200) < 0.5).astype(float)
        t = rng.exponential(1.0, 200)
        data = counting_process_data(
            np.arange(200),
            np.zeros(200),
            t,
            np.ones(200, bool),
            np.column_stack([g, 2.0 * g]),
            ("a", "b"),
        )
        with pytest.raises(CollinearCovariatesError):
            fit_cox(data)

    def test_monotone_likelihood_flagged(self):
        # Perfectly separated data: the coefficient diverges.
        t = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        x = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
        data = counting_process_data(
            np.arange(6), np.zeros(6), t, np.ones(6, bool), x[:, None], ("x",)
        )
        fit = fit_cox(data)
        assert not fit.converged


class TestCountingProcess:
    def test_row_counts(self):
        cohort = cohort_for(n=200, seed=91)
        data = build_counting_process(cohort, "none")
        grid = cohort.config.grid.survival_times
        i = 0
        expected = int(np.searchsorted(grid, cohort.interval_upper[i], side="left")) + 1
        assert int((data.subject == i).sum()) == expected
        # a subject recorded at 2.0 on the half-yearly grid has 4 rows
        recorded_at_2 = np.flatnonzero(np.isclose(cohort.interval_upper, 2.0))
        if recorded_at_2.size:
            assert int((data.subject == recorded_at_2[0]).sum()) == 4

    def test_none_source_is_genotype_only(self):
        cohort = cohort_for(n=60, seed=92)
        data = build_counting_process(cohort, "none")
        assert data.covariate_names == ("snp",)
        assert np.array_equal(np.unique(data.covariates), np.unique(cohort.snp))

    def test_true_trajectory_matches_definition(self):
        cohort = cohort_for(n=80, seed=93)
        data = build_counting_process(cohort, "true-trajectory")
        grid = cohort.config.grid.survival_times
        starts = np.concatenate([[0.0], grid[:-1]])
        for row in range(0, data.n_rows, 37):
            i = int(data.subject[row])
            t0 = data.start[row]
            j = int(np.searchsorted(starts, t0))
            b = cohort.random_effects[i]
            expected = (8.5 + b[0]) + (0.1 + b[1]) * t0
            assert data.covariates[row, 1] == pytest.approx(expected, rel=1e-12)

    def test_terminal_event_flags(self):
        cohort = cohort_for(n=100, seed=94)
        data = build_counting_process(cohort, "none")
        for i in range(0, 100, 11):
            mask = data.subject == i
            events = data.event[mask]
            assert events.sum() == (1 if cohort.event[i] else 0)
            if cohort.event[i]:
                assert events[-1]
                assert data.stop[mask][-1] == cohort.interval_upper[i]

    def test_validation_rejects_gaps(self):
        with pytest.raises(ValueError):
            counting_process_data(
                [0, 0], [0.0, 0.7], [0.5, 1.0], [False, True], [[1.0], [1.0]], ("x",)
            )
        with pytest.raises(ValueError):
            counting_process_data([0], [1.0], [1.0], [True], [[1.0]], ("x",))

    def test_event_must_be_terminal(self):
        with pytest.raises(ValueError):
            counting_process_data(
                [0, 0], [0.0, 0.5], [0.5, 1.0], [True, False], [[1.0], [1.0]], ("x",)
            )
