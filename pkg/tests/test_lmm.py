"""Longitudinal-model fitting: recovery, consistency, BLUP behavior."""

import numpy as np
import pytest

from snpdesign.design import HazardModel, TrajectoryModel
from snpdesign.lmm import SingularDesignError, adjust_responses, blup_trajectory, fit_lmm
from snpdesign.simulate import SimConfig, TimeGrid, simulate_cohort


def make_config(n=1000, seed=101, replicate=0, scenario="S1", random_cov=None, **over):
    trajectory = TrajectoryModel(
        fixed_coeffs=over.pop("fixed_coeffs", (8.5, 0.1)),
        snp_effect=over.pop("snp_effect", 0.3),
        random_cov=np.array([[2.0, -0.1], [-0.1, 1.0]]) if random_cov is None else random_cov,
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
        maf=0.3,
        grid=TimeGrid.visit_scenario(scenario, 10.0),
        seed=seed,
        replicate=replicate,
    )


class TestDegenerateRecovery:
    def test_noiseless_polynomial_is_recovered_exactly(self):
        cfg = make_config(
            n=60,
            fixed_coeffs=(2.0, 0.5),
            snp_effect=0.25,
            random_cov=np.eye(2) * 1e-30,
            error_var=1e-30,
            scenario="S4",
        )
        cohort = simulate_cohort(cfg)
        fit = fit_lmm(cohort, degree=1, max_restarts=1)
        times = cfg.grid.longitudinal_times
        worst = 0.0
        for i in range(cohort.n_subjects):
            k = int(cohort.n_measurements[i])
            pred = fit.coef[0] + fit.coef[1] * times[:k] + fit.snp_effect * cohort.snp[i]
            worst = max(worst, float(np.max(np.abs(pred - cohort.measurements[i, :k]))))
        assert worst < 1e-10


@pytest.fixture(scope="module")
def replicate_fits():
    fits = []
    for rep in range(200):
        cohort = simulate_cohort(make_config(replicate=rep))
        fits.append(fit_lmm(cohort, degree=1))
    return fits


class TestConsistency:
    def test_snp_effect_unbiased(self, replicate_fits):
        estimates = np.array([f.snp_effect for f in replicate_fits])
        assert abs(estimates.mean() - 0.30) < 0.01

    def test_variance_components_recovered(self, replicate_fits):
        sigmas = np.array([f.random_cov for f in replicate_fits])
        mean_sigma = sigmas.mean(axis=0)
        truth = np.array([[2.0, -0.1], [-0.1, 1.0]])
        assert np.all(np.abs(mean_sigma - truth) <= 0.15 * np.abs(truth) + 1e-9)
        err_vars = np.array([f.error_var for f in replicate_fits])
        assert abs(err_vars.mean() - 0.7) < 0.05

    def test_fits_converge(self, replicate_fits):
        assert np.mean([f.converged for f in replicate_fits]) > 0.99


class TestAdjustResponses:
    def test_zero_genotype_rows_unchanged(self):
        cohort = simulate_cohort(make_config(n=120, seed=7))
        adj = adjust_responses(cohort, 0.31)
        zero = cohort.snp == 0
        assert np.array_equal(
            adj.measurements[zero], cohort.measurements[zero], equal_nan=True
        )

    def test_zero_estimate_is_identity(self):
        cohort = simulate_cohort(make_config(n=50, seed=8))
        adj = adjust_responses(cohort, 0.0)
        assert np.array_equal(adj.measurements, cohort.measurements, equal_nan=True)

    def test_homozygous_shift(self):
        cohort = simulate_cohort(make_config(n=200, seed=9))
        adj = adjust_responses(cohort, 0.3)
        two = np.flatnonzero(cohort.snp == 2)
        i = two[0]
        k = int(cohort.n_measurements[i])
        assert np.allclose(
            adj.measurements[i, :k], cohort.measurements[i, :k] - 0.6, atol=1e-12
        )

    def test_nonfinite_rejected(self):
        cohort = simulate_cohort(make_config(n=20, seed=10))
        with pytest.raises(ValueError):
            adjust_responses(cohort, float("nan"))


class TestBlupTrajectory:
    def test_zero_blup_gives_population_curve(self):
        cohort = simulate_cohort(make_config(n=150, seed=11))
        fit = fit_lmm(cohort, degree=1, include_snp=False)
        fit_zero = fit.__class__(**{**fit.__dict__, "blups": np.zeros_like(fit.blups)})
        t = 3.0
        assert blup_trajectory(fit_zero, 0, t) == pytest.approx(fit.coef[0] + fit.coef[1] * t)

    def test_noiseless_blups_match_truth(self):
        cfg = make_config(
            n=80,
            snp_effect=0.0,
            random_cov=np.array([[0.5, 0.02], [0.02, 0.05]]),
            error_var=1e-12,
            seed=12,
        )
        cohort = simulate_cohort(cfg)
        fit = fit_lmm(cohort, degree=1, include_snp=False)
        for i in range(0, 80, 9):
            if cohort.n_measurements[i] < 3:
                continue
            true_curve = 8.5 + cohort.random_effects[i, 0] + (0.1 + cohort.random_effects[i, 1]) * 4.0
            assert blup_trajectory(fit, i, 4.0) == pytest.approx(true_curve, abs=1e-4)

    def test_unknown_subject(self):
        cohort = simulate_cohort(make_config(n=30, seed=13))
        fit = fit_lmm(cohort, degree=1)
        with pytest.raises(ValueError):
            blup_trajectory(fit, 999, 1.0)

    def test_denser_grids_predict_better(self):
        # Prediction error of the genotype-free trajectory shrinks from the
        # sparse S5 schedule to the dense S1 schedule.
        mse = {}
        for scenario in ("S5", "S1"):
            errors = []
            for rep in range(40):
                cfg = make_config(n=300, scenario=scenario, replicate=rep, seed=303)
                cohort = simulate_cohort(cfg)
                fit = fit_lmm(cohort, degree=1)
                adj = adjust_responses(cohort, fit.snp_effect)
                red = fit_lmm(adj, degree=1, include_snp=False)
                t = 5.0
                truth = (
                    8.5
                    + cohort.random_effects[:, 0]
                    + (0.1 + cohort.random_effects[:, 1]) * t
                )
                pred = red.coef[0] + red.blups[:, 0] + (red.coef[1] + red.blups[:, 1]) * t
                errors.append(float(np.mean((pred - truth) ** 2)))
            mse[scenario] = float(np.mean(errors))
        assert mse["S1"] < mse["S5"]


class TestValidation:
    def test_bad_degree(self):
        cohort = simulate_cohort(make_config(n=20, seed=14))
        with pytest.raises(ValueError):
            fit_lmm(cohort, degree=3)

    def test_monomorphic_genotype_is_singular(self):
        cfg = make_config(n=40, seed=15)
        cohort = simulate_cohort(cfg)
        cohort.snp[:] = 0
        with pytest.raises(SingularDesignError):
            fit_lmm(cohort, degree=1, max_restarts=1)

    def test_record_serialization(self):
        cohort = simulate_cohort(make_config(n=100, seed=16))
        fit = fit_lmm(cohort, degree=1)
        record = fit.to_record()
        assert "snp.estimate=" in record and "error_var=" in record
        assert "converged=1" in record
