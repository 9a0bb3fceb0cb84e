"""Quadrature and event-time inversion against closed forms and brute force."""

import math

import numpy as np
import pytest

from snpdesign.design import HazardModel, TrajectoryModel
from snpdesign.hazards import cumulative_hazard, solve_event_time, solve_event_times


def make_models(lam=0.01, v=1.1, gamma=0.0, alpha=0.0, coeffs=(8.5, 0.1), beta_g=0.3):
    hazard = HazardModel(
        weibull_scale=lam, weibull_shape=v, direct_effect=gamma, association=alpha
    )
    cov = np.diag([2.0, 0.1, 0.01][: len(coeffs)])
    trajectory = TrajectoryModel(
        fixed_coeffs=coeffs, snp_effect=beta_g, random_cov=cov, error_var=0.7
    )
    return hazard, trajectory


def riemann_cumulative_hazard(hazard, trajectory, b, snp, t, steps=1_000_000):
    """Midpoint Riemann oracle, kept independent of the quadrature code."""
    u = (np.arange(steps) + 0.5) * (t / steps)
    coeffs = trajectory.fixed_coeffs
    b = np.asarray(b, dtype=float)
    eta = np.zeros_like(u)
    for j, beta in enumerate(coeffs):
        dev = b[j] if j < len(b) else 0.0
        eta += (beta + dev) * u**j
    eta += trajectory.snp_effect * snp
    lam, v = hazard.weibull_scale, hazard.weibull_shape
    integrand = lam * v * u ** (v - 1.0) * np.exp(hazard.direct_effect * snp + hazard.association * eta)
    return float(integrand.sum() * (t / steps))


class TestCumulativeHazard:
    def test_zero_time(self):
        hazard, trajectory = make_models()
        assert cumulative_hazard(hazard, trajectory, np.zeros(2), 0, 0.0) == 0.0

    def test_weibull_closed_form(self):
        hazard, trajectory = make_models(lam=0.01, v=1.1, gamma=0.0, alpha=0.0)
        got = cumulative_hazard(hazard, trajectory, np.zeros(2), 1, 10.0)
        assert got == pytest.approx(0.01 * 10**1.1, rel=1e-10)

    def test_linear_trajectory_vs_riemann(self):
        hazard, trajectory = make_models(lam=0.01, v=1.1, gamma=0.1, alpha=0.25)
        b = np.array([0.4, -0.05])
        got = cumulative_hazard(hazard, trajectory, b, 1, 8.3)
        want = riemann_cumulative_hazard(hazard, trajectory, b, 1, 8.3)
        assert got == pytest.approx(want, rel=1e-6)

    def test_random_parameter_sets_vs_riemann(self):
        rng = np.random.default_rng(20240809)
        for _ in range(20):
            lam = float(rng.uniform(0.001, 0.05))
            v = float(rng.uniform(0.9, 1.5))
            alpha = float(rng.uniform(-0.3, 0.5))
            gamma = float(rng.uniform(-0.2, 0.3))
            coeffs = (float(rng.uniform(5, 10)), float(rng.uniform(-0.6, 0.6)))
            hazard, trajectory = make_models(lam, v, gamma, alpha, coeffs)
            b = rng.normal(0, 0.5, size=2)
            snp = int(rng.integers(0, 3))
            t = float(rng.uniform(0.5, 12.0))
            got = cumulative_hazard(hazard, trajectory, b, snp, t)
            want = riemann_cumulative_hazard(hazard, trajectory, b, snp, t, steps=200_000)
            assert got == pytest.approx(want, rel=2e-6)

    def test_nondecreasing_in_time(self):
        hazard, trajectory = make_models(alpha=0.25, gamma=0.1)
        b = np.array([0.3, 0.02])
        times = np.linspace(0.0, 20.0, 41)
        values = [cumulative_hazard(hazard, trajectory, b, 2, t) for t in times]
        assert values[0] == 0.0
        assert np.all(np.diff(values) >= 0.0)

    def test_negative_time_rejected(self):
        hazard, trajectory = make_models()
        with pytest.raises(ValueError):
            cumulative_hazard(hazard, trajectory, np.zeros(2), 0, -1.0)


class TestSolveEventTime:
    def test_weibull_closed_form_inverse(self):
        hazard, trajectory = make_models(lam=0.01, v=1.1, gamma=0.0, alpha=0.0)
        got = solve_event_time(hazard, trajectory, np.zeros(2), 0, 0.5)
        want = (math.log(2.0) / 0.01) ** (1.0 / 1.1)
        assert got == pytest.approx(want, abs=1e-6)

    def test_closed_form_inverse_many_draws(self):
        hazard, trajectory = make_models(lam=0.01, v=1.1, gamma=0.0, alpha=0.0)
        rng = np.random.default_rng(7)
        u = rng.random(2000) * 0.98 + 0.01
        got = solve_event_times(hazard, trajectory, np.zeros((2000, 2)), np.zeros(2000), u)
        want = (-np.log(u) / 0.01) ** (1.0 / 1.1)
        finite = np.isfinite(got)
        assert np.all(finite == (want <= 100.0))
        assert np.max(np.abs(got[finite] - want[finite])) < 1e-6

    def test_near_one_draw_gives_tiny_time(self):
        hazard, trajectory = make_models(alpha=0.25, gamma=0.1)
        t = solve_event_time(hazard, trajectory, np.zeros(2), 1, 1.0 - 1e-12)
        assert 0.0 <= t < 1e-3

    def test_defining_equation_residual(self):
        hazard, trajectory = make_models(lam=0.005, v=1.2, gamma=0.1, alpha=0.3)
        rng = np.random.default_rng(11)
        for _ in range(25):
            b = rng.normal(0, 0.4, size=2)
            snp = int(rng.integers(0, 3))
            u = float(rng.uniform(0.02, 0.98))
            t = solve_event_time(hazard, trajectory, b, snp, u)
            if math.isinf(t):
                surv_horizon = math.exp(-cumulative_hazard(hazard, trajectory, b, snp, 100.0))
                assert surv_horizon > u
                continue
            res = math.exp(-cumulative_hazard(hazard, trajectory, b, snp, t)) - u
            assert abs(res) < 1e-8

    def test_beyond_horizon_marker(self):
        hazard, trajectory = make_models(lam=1e-7, v=1.1, gamma=0.0, alpha=0.0)
        assert math.isinf(solve_event_time(hazard, trajectory, np.zeros(2), 0, 0.5))

    def test_invalid_draws_rejected(self):
        hazard, trajectory = make_models()
        for u in (0.0, 1.0, -0.2, 1.4):
            with pytest.raises(ValueError):
                solve_event_time(hazard, trajectory, np.zeros(2), 0, u)

    def test_quadratic_trajectory_residual(self):
        hazard, trajectory = make_models(
            lam=0.003, v=1.15, gamma=0.05, alpha=0.35, coeffs=(7.5, -0.5, 0.2), beta_g=0.2
        )
        rng = np.random.default_rng(3)
        b = rng.normal(0, [1.0, 0.3, 0.05])
        t = solve_event_time(hazard, trajectory, b, 2, 0.4)
        res = math.exp(-cumulative_hazard(hazard, trajectory, b, 2, t)) - 0.4
        assert abs(res) < 1e-8
