"""Cohort generation for validating the closed-form calculators.

A cohort draws, per subject: a genotype under Hardy-Weinberg equilibrium,
random trajectory deviations, noisy biomarker measurements on a visit grid, a
latent event time by inverting the subject's survival function, and a
censoring time uniform over the latter half of follow-up.  Event or censoring
is then discretized onto the assessment grid.

Randomness is counter-based and splittable: subject ``i`` of replicate ``r``
draws from a Philox stream keyed by ``(seed, r, i)``, so replicates can run in
parallel (or in any order) without sequence coupling.  Within a subject the
draw order is fixed: genotype, random effects, measurement noise, survival
draw, censoring draw.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from snpdesign.design import HazardModel, TrajectoryModel
from snpdesign.hazards import cumulative_hazard, solve_event_time, solve_event_times

__all__ = [
    "TimeGrid",
    "SimConfig",
    "SubjectRecord",
    "Cohort",
    "DiscretizedObservation",
    "InvalidCovarianceError",
    "VISIT_SCENARIOS",
    "sample_genotype",
    "sample_random_effects",
    "trajectory_value",
    "simulate_longitudinal",
    "sample_censoring",
    "discretize_observation",
    "simulate_cohort",
    "write_cohort",
    "cumulative_hazard",
    "solve_event_time",
    "solve_event_times",
]

VISIT_SCENARIOS = ("S1", "S2", "S3", "S4", "S5")

LONGITUDINAL_COLUMNS = ("id", "time", "value")
SURVIVAL_COLUMNS = ("id", "snp", "t_event_recorded", "event", "t_L", "t_U")


class InvalidCovarianceError(ValueError):
    """Random-effect covariance is not positive definite."""


class DiscretizedObservation(NamedTuple):
    lower: float
    upper: float
    clamped: bool


@dataclass(frozen=True)
class TimeGrid:
    """Visit schedule: biomarker measurement times and survival assessments.

    Both grids are strictly increasing within ``[0, max_followup]``; the
    measurement grid starts at 0 and the assessment grid ends exactly at
    ``max_followup``.
    """

    longitudinal_times: np.ndarray
    survival_times: np.ndarray
    max_followup: float
    scenario: str | None = None

    def __post_init__(self) -> None:
        long_t = np.asarray(self.longitudinal_times, dtype=float)
        surv_t = np.asarray(self.survival_times, dtype=float)
        tau = float(self.max_followup)
        if tau <= 0.0:
            raise ValueError(f"max_followup must be > 0, got {tau}")
        for name, arr in (("longitudinal_times", long_t), ("survival_times", surv_t)):
            if arr.ndim != 1 or len(arr) == 0:
                raise ValueError(f"{name} must be a nonempty 1-d sequence")
            if np.any(np.diff(arr) <= 0.0):
                raise ValueError(f"{name} must be strictly increasing")
            if arr[0] < 0.0 or arr[-1] > tau + 1e-9:
                raise ValueError(f"{name} must lie within [0, max_followup]")
        if long_t[0] != 0.0:
            raise ValueError("longitudinal_times must start at 0")
        if abs(surv_t[-1] - tau) > 1e-9:
            raise ValueError("survival_times must end at max_followup")
        object.__setattr__(self, "longitudinal_times", long_t)
        object.__setattr__(self, "survival_times", surv_t)
        object.__setattr__(self, "max_followup", tau)

    @classmethod
    def visit_scenario(cls, name: str, max_followup: float) -> "TimeGrid":
        """Named visit schedules S1..S5, densest to sparsest.

        S1 quarterly measurements / half-yearly assessments, S2 half-yearly /
        yearly, S3 yearly / six assessments, S4 five / five, S5 five / three;
        all spread over [0, max_followup].
        """
        tau = float(max_followup)

        def every(step: float) -> np.ndarray:
            n = int(round(tau / step))
            return np.round(np.arange(0, n + 1) * step, 10)

        def assessments(count: int) -> np.ndarray:
            return np.round(tau * np.arange(1, count + 1) / count, 10)

        if name == "S1":
            return cls(every(0.25), every(0.5)[1:], tau, name)
        if name == "S2":
            return cls(every(0.5), every(1.0)[1:], tau, name)
        if name == "S3":
            return cls(every(1.0), assessments(6), tau, name)
        if name == "S4":
            return cls(np.linspace(0.0, tau, 5), assessments(5), tau, name)
        if name == "S5":
            return cls(np.linspace(0.0, tau, 5), assessments(3), tau, name)
        raise ValueError(f"unknown visit scenario {name!r}; expected one of {VISIT_SCENARIOS}")


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to generate one cohort deterministically.

    ``seed`` is the master seed and ``replicate`` the replicate index; together
    with the subject index they determine every random stream.  When
    ``noise_scale_is_sd`` is set, the trajectory model's ``error_var`` is
    reinterpreted as a standard deviation (sensitivity switch).
    """

    n_subjects: int
    trajectory: TrajectoryModel
    hazard: HazardModel
    maf: float
    grid: TimeGrid
    seed: int
    replicate: int = 0
    noise_scale_is_sd: bool = False

    def __post_init__(self) -> None:
        if self.n_subjects < 1:
            raise ValueError(f"n_subjects must be >= 1, got {self.n_subjects}")
        if not 0.0 < self.maf < 1.0:
            raise ValueError(f"maf must be in (0, 1), got {self.maf}")
        if self.replicate < 0:
            raise ValueError("replicate index must be >= 0")

    @property
    def overall_effect(self) -> float:
        return self.hazard.direct_effect + self.hazard.association * self.trajectory.snp_effect


@dataclass(frozen=True)
class SubjectRecord:
    """One subject's complete simulated history."""

    subject: int
    snp: int
    random_effects: np.ndarray
    measurements: tuple[tuple[float, float], ...]
    latent_time: float
    censor_time: float
    observed_time: float
    event: bool
    interval: tuple[float, float]


@dataclass(frozen=True)
class Cohort:
    """Columnar cohort: one entry per subject, measurements row-padded with NaN."""

    config: SimConfig
    snp: np.ndarray
    random_effects: np.ndarray
    measurements: np.ndarray
    n_measurements: np.ndarray
    latent_time: np.ndarray
    censor_time: np.ndarray
    observed_time: np.ndarray
    event: np.ndarray
    interval_lower: np.ndarray
    interval_upper: np.ndarray

    @property
    def n_subjects(self) -> int:
        return len(self.snp)

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def subject(self, i: int) -> SubjectRecord:
        times = self.config.grid.longitudinal_times
        k = int(self.n_measurements[i])
        return SubjectRecord(
            subject=i,
            snp=int(self.snp[i]),
            random_effects=self.random_effects[i].copy(),
            measurements=tuple(
                (float(times[j]), float(self.measurements[i, j])) for j in range(k)
            ),
            latent_time=float(self.latent_time[i]),
            censor_time=float(self.censor_time[i]),
            observed_time=float(self.observed_time[i]),
            event=bool(self.event[i]),
            interval=(float(self.interval_lower[i]), float(self.interval_upper[i])),
        )

    def with_measurements(self, measurements: np.ndarray) -> "Cohort":
        return replace(self, measurements=measurements)


def sample_genotype(maf: float, rng: np.random.Generator, size: int | None = None):
    """Genotype draws in {0, 1, 2} with Hardy-Weinberg frequencies (q^2, 2pq, p^2)."""
    if not 0.0 < maf < 1.0:
        raise ValueError(f"maf must be in (0, 1), got {maf}")
    q = 1.0 - maf
    u = rng.random() if size is None else rng.random(size)
    g = (u > q * q).astype(np.int64) + (u > q * q + 2.0 * maf * q)
    return int(g) if size is None else g


def sample_random_effects(cov: np.ndarray, rng: np.random.Generator, size: int | None = None):
    """Mean-zero multivariate normal draws via the Cholesky factor of ``cov``."""
    cov = np.asarray(cov, dtype=float)
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidCovarianceError("covariance must be positive definite") from exc
    z = rng.standard_normal(cov.shape[0] if size is None else (size, cov.shape[0]))
    return z @ factor.T


def trajectory_value(model: TrajectoryModel, random_effects, snp, t):
    """Noise-free trajectory of one subject at time ``t`` (scalar or array).

    Polynomial coefficients beyond the random-effect dimension have no
    subject-level deviation.
    """
    b = np.asarray(random_effects, dtype=float).reshape(-1)
    t = np.asarray(t, dtype=float)
    value = np.zeros_like(t)
    for j, beta in enumerate(model.fixed_coeffs):
        dev = float(b[j]) if j < len(b) else 0.0
        value = value + (beta + dev) * t**j
    value = value + model.snp_effect * float(snp)
    return float(value) if value.ndim == 0 else value


def simulate_longitudinal(
    model: TrajectoryModel,
    random_effects,
    snp,
    times,
    rng: np.random.Generator,
    noise_scale_is_sd: bool = False,
) -> np.ndarray:
    """Measurements at grid ``times``: trajectory plus iid Gaussian noise."""
    times = np.asarray(times, dtype=float)
    eta = trajectory_value(model, random_effects, snp, times)
    scale = model.error_var if noise_scale_is_sd else math.sqrt(model.error_var)
    return eta + scale * rng.standard_normal(len(times))


def sample_censoring(max_followup: float, rng: np.random.Generator) -> float:
    """Censoring time, uniform over the latter half of the follow-up period."""
    if max_followup <= 0.0:
        raise ValueError(f"max_followup must be > 0, got {max_followup}")
    return max_followup / 2.0 + rng.random() * max_followup / 2.0


def discretize_observation(time: float, survival_times: np.ndarray) -> DiscretizedObservation:
    """Bracket an observed time onto the assessment grid as (t_L, t_U].

    ``lower`` is the largest assessment strictly below ``time`` (0 before the
    first assessment) and ``upper`` the smallest assessment at or above it; a
    time equal to a grid point maps onto that point.  Times beyond the last
    assessment clamp to it (administrative censoring) with ``clamped`` set.
    """
    grid = np.asarray(survival_times, dtype=float)
    if time < 0.0:
        raise ValueError(f"time must be >= 0, got {time}")
    if time > grid[-1]:
        lower = float(grid[-2]) if len(grid) > 1 else 0.0
        return DiscretizedObservation(lower, float(grid[-1]), True)
    idx = int(np.searchsorted(grid, time, side="left"))
    lower = float(grid[idx - 1]) if idx > 0 else 0.0
    return DiscretizedObservation(lower, float(grid[idx]), False)


def _subject_keys(seed: int, replicate: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(replicate,))
    return ss.generate_state(2 * n, np.uint64).reshape(n, 2)


def _subject_rng(keys: np.ndarray, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=keys[i]))


def simulate_cohort(config: SimConfig) -> Cohort:
    """Generate one cohort; bit-identical for identical configs."""
    n = config.n_subjects
    grid = config.grid
    long_t = grid.longitudinal_times
    tau = grid.max_followup
    r = config.trajectory.random_dim
    try:
        factor = np.linalg.cholesky(config.trajectory.random_cov)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - blocked by model validation
        raise InvalidCovarianceError("random_cov must be positive definite") from exc
    q = 1.0 - config.maf
    noise = (
        config.trajectory.error_var
        if config.noise_scale_is_sd
        else math.sqrt(config.trajectory.error_var)
    )

    keys = _subject_keys(config.seed, config.replicate, n)
    snp = np.empty(n, dtype=np.int64)
    b = np.empty((n, r))
    y = np.empty((n, len(long_t)))
    survival_draw = np.empty(n)
    censor = np.empty(n)
    coeffs = config.trajectory.fixed_coeffs
    poly = np.zeros((len(coeffs), len(long_t)))
    for j in range(len(coeffs)):
        poly[j] = long_t**j
    fixed_curve = np.asarray(coeffs) @ poly
    for i in range(n):
        rng = _subject_rng(keys, i)
        u = rng.random()
        snp[i] = (u > q * q) + (u > q * q + 2.0 * config.maf * q)
        b[i] = factor @ rng.standard_normal(r)
        eta = fixed_curve + b[i] @ poly[:r] + config.trajectory.snp_effect * snp[i]
        y[i] = eta + noise * rng.standard_normal(len(long_t))
        survival_draw[i] = rng.random()
        censor[i] = tau / 2.0 + rng.random() * tau / 2.0

    latent = solve_event_times(config.hazard, config.trajectory, b, snp, survival_draw)
    observed = np.minimum(latent, censor)
    event = latent <= censor

    surv_t = grid.survival_times
    upper_idx = np.minimum(np.searchsorted(surv_t, observed, side="left"), len(surv_t) - 1)
    clamped = observed > surv_t[-1] + 1e-12
    event = np.where(clamped, False, event)
    t_upper = surv_t[upper_idx]
    t_lower = np.where(upper_idx > 0, surv_t[np.maximum(upper_idx - 1, 0)], 0.0)

    n_meas = np.searchsorted(long_t, observed, side="right").astype(np.int64)
    col = np.arange(len(long_t))[None, :]
    y = np.where(col < n_meas[:, None], y, np.nan)

    return Cohort(
        config=config,
        snp=snp,
        random_effects=b,
        measurements=y,
        n_measurements=n_meas,
        latent_time=latent,
        censor_time=censor,
        observed_time=observed,
        event=event,
        interval_lower=t_lower,
        interval_upper=t_upper,
    )


def write_cohort(cohort: Cohort, directory, basename: str = "cohort") -> tuple[str, str]:
    """Export the cohort as two delimited files.

    ``<basename>_longitudinal.csv`` holds one row per (subject, measurement)
    with columns id,time,value; ``<basename>_survival.csv`` one row per
    subject with columns id,snp,t_event_recorded,event,t_L,t_U where
    ``t_event_recorded`` is the assessment time the observation is recorded
    at and ``event`` is 1 for events, 0 for censorings.
    """
    import os

    os.makedirs(directory, exist_ok=True)
    long_path = os.path.join(directory, f"{basename}_longitudinal.csv")
    surv_path = os.path.join(directory, f"{basename}_survival.csv")
    times = cohort.config.grid.longitudinal_times
    with open(long_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LONGITUDINAL_COLUMNS)
        for i in range(cohort.n_subjects):
            for j in range(int(cohort.n_measurements[i])):
                w.writerow([i, repr(float(times[j])), repr(float(cohort.measurements[i, j]))])
    with open(surv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SURVIVAL_COLUMNS)
        for i in range(cohort.n_subjects):
            w.writerow(
                [
                    i,
                    int(cohort.snp[i]),
                    repr(float(cohort.interval_upper[i])),
                    int(cohort.event[i]),
                    repr(float(cohort.interval_lower[i])),
                    repr(float(cohort.interval_upper[i])),
                ]
            )
    return long_path, surv_path
