"""Closed-form power and sample-size calculators for the overall SNP effect.

The survival risk of a SNP decomposes into a direct log-hazard effect and an
indirect effect mediated by a longitudinal biomarker trajectory.  Testing the
combined (overall) effect two-sided at level ``alpha_level`` with target power
requires a number of events that depends only on the genotype variance
``2p(1-p)`` and the squared overall effect.  Everything in this module is a
pure function of its arguments and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

__all__ = [
    "GeneticDesign",
    "EffectParameters",
    "TrajectoryModel",
    "HazardModel",
    "InfeasibleDesignError",
    "MafInfeasibleError",
    "overall_effect",
    "genotype_variance",
    "required_events",
    "power_given_events",
    "detectable_effect",
    "solve_required_maf",
    "normal_quantile",
    "normal_cdf",
    "normal_sf",
]

_STD_NORMAL = NormalDist()
_SQRT2 = math.sqrt(2.0)


class InfeasibleDesignError(ValueError):
    """The requested design cannot be satisfied (e.g. zero overall effect)."""


class MafInfeasibleError(InfeasibleDesignError):
    """No minor allele frequency in (0, 0.5] reaches the requested power."""


def normal_cdf(z: float) -> float:
    """Standard normal CDF, accurate to ~1e-16 absolute via erfc."""
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_sf(z: float) -> float:
    """Standard normal survival function 1 - CDF(z), without cancellation."""
    return 0.5 * math.erfc(z / _SQRT2)


def normal_quantile(prob: float) -> float:
    """Inverse standard normal CDF.

    A rational approximation supplies the starting value; one Newton step
    against the erfc-based CDF polishes it.  Absolute error is far below the
    1e-9 needed for far-tail quantiles (e.g. genome-wide 5e-8 thresholds).

    Raises:
        ValueError: if ``prob`` is not strictly inside (0, 1).
    """
    if not 0.0 < prob < 1.0:
        raise ValueError(f"probability must be in (0, 1), got {prob}")
    z = _STD_NORMAL.inv_cdf(prob)
    # Newton refinement on the nearer tail to avoid cancellation.
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    if pdf > 1e-280:
        if prob <= 0.5:
            err = normal_cdf(z) - prob
        else:
            err = normal_sf(z) - (1.0 - prob)
            err = -err
        z -= err / pdf
    return z


@dataclass(frozen=True)
class GeneticDesign:
    """Allele frequency and testing targets for the closed-form calculators.

    Args:
        maf: minor allele frequency p, in (0, 1).
        alpha_level: two-sided significance level, in (0, 1).
        power: target power, in (0, 1).  Optional for operations that do not
            need it (e.g. computing power from a fixed event count).
    """

    maf: float
    alpha_level: float
    power: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.maf < 1.0:
            raise ValueError(f"maf must be in (0, 1), got {self.maf}")
        if not 0.0 < self.alpha_level < 1.0:
            raise ValueError(f"alpha_level must be in (0, 1), got {self.alpha_level}")
        if self.power is not None and not 0.0 < self.power < 1.0:
            raise ValueError(f"power must be in (0, 1), got {self.power}")

    @property
    def genotype_variance(self) -> float:
        return genotype_variance(self.maf)

    def _require_power(self) -> float:
        if self.power is None:
            raise ValueError("this operation needs a target power on the design")
        return self.power


@dataclass(frozen=True)
class EffectParameters:
    """Direct, association, and trajectory effects making up the overall effect.

    ``direct_effect`` is the log-hazard per allele copy, ``association`` the
    log-hazard per trajectory unit, and ``trajectory_effect`` the trajectory
    shift per allele copy.
    """

    direct_effect: float
    association: float
    trajectory_effect: float

    def __post_init__(self) -> None:
        for name in ("direct_effect", "association", "trajectory_effect"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def overall(self) -> float:
        return self.direct_effect + self.association * self.trajectory_effect


@dataclass(frozen=True)
class TrajectoryModel:
    """Subject-specific polynomial biomarker trajectory.

    ``fixed_coeffs`` are the population polynomial coefficients (constant,
    linear, optionally quadratic); ``snp_effect`` shifts the whole curve per
    allele copy.  ``random_cov`` is the covariance of the subject-level
    deviations of the leading polynomial coefficients and must be symmetric
    positive definite; its dimension may be smaller than the number of fixed
    coefficients (missing random components are zero).  ``error_var`` is the
    measurement-noise variance.
    """

    fixed_coeffs: tuple[float, ...]
    snp_effect: float
    random_cov: np.ndarray
    error_var: float

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.fixed_coeffs)
        object.__setattr__(self, "fixed_coeffs", coeffs)
        if not 1 <= len(coeffs) <= 3:
            raise ValueError("fixed_coeffs must have 1 to 3 entries (degree <= 2)")
        cov = np.asarray(self.random_cov, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("random_cov must be a square matrix")
        if cov.shape[0] > len(coeffs):
            raise ValueError("random_cov dimension exceeds number of fixed coefficients")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("random_cov must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("random_cov must be positive definite") from exc
        object.__setattr__(self, "random_cov", cov)
        if not self.error_var > 0.0:
            raise ValueError(f"error_var must be > 0, got {self.error_var}")

    @property
    def degree(self) -> int:
        return len(self.fixed_coeffs) - 1

    @property
    def random_dim(self) -> int:
        return self.random_cov.shape[0]


@dataclass(frozen=True)
class HazardModel:
    """Weibull baseline hazard with a SNP effect and a trajectory association.

    The baseline hazard is ``scale * shape * t**(shape - 1)`` so the baseline
    cumulative hazard is ``scale * t**shape``.
    """

    weibull_scale: float
    weibull_shape: float
    direct_effect: float
    association: float

    def __post_init__(self) -> None:
        if not self.weibull_scale > 0.0:
            raise ValueError(f"weibull_scale must be > 0, got {self.weibull_scale}")
        if not self.weibull_shape > 0.0:
            raise ValueError(f"weibull_shape must be > 0, got {self.weibull_shape}")

    def baseline_hazard(self, t: float) -> float:
        return self.weibull_scale * self.weibull_shape * float(t) ** (self.weibull_shape - 1.0)

    def baseline_cumulative_hazard(self, t: float) -> float:
        return self.weibull_scale * float(t) ** self.weibull_shape


def overall_effect(effects: EffectParameters) -> float:
    """Overall log-hazard per allele copy: direct plus mediated effect."""
    return effects.overall


def genotype_variance(maf: float) -> float:
    """Variance 2p(1-p) of an additively coded genotype at allele frequency p."""
    if not 0.0 <= maf <= 1.0:
        raise ValueError(f"maf must be in [0, 1], got {maf}")
    return 2.0 * maf * (1.0 - maf)


def required_events(design: GeneticDesign, theta: float) -> float:
    """Number of events needed to detect overall effect ``theta``.

    Returns the exact real value; round up separately when planning a study
    so that the power/event-count identities stay exact.

    Raises:
        InfeasibleDesignError: if ``theta`` is zero.
    """
    if theta == 0.0:
        raise InfeasibleDesignError("overall effect is zero: no event count suffices")
    power = design._require_power()
    z_power = normal_quantile(power)
    z_alpha = normal_quantile(1.0 - design.alpha_level / 2.0)
    return (z_power + z_alpha) ** 2 / (design.genotype_variance * theta**2)


def power_given_events(design: GeneticDesign, theta: float, events: float) -> float:
    """Two-sided power to detect ``theta`` with ``events`` observed events.

    Uses ``abs(theta)``: a two-sided test detects either direction, and the
    vanishing rejection mass in the opposite tail is ignored.
    """
    if events < 0.0:
        raise ValueError(f"events must be >= 0, got {events}")
    z_alpha = normal_quantile(1.0 - design.alpha_level / 2.0)
    return normal_cdf(math.sqrt(design.genotype_variance * events) * abs(theta) - z_alpha)


def detectable_effect(design: GeneticDesign, events: float) -> float:
    """Smallest overall effect detectable at the design's power with ``events``."""
    if not events > 0.0:
        raise ValueError(f"events must be > 0, got {events}")
    power = design._require_power()
    z_power = normal_quantile(power)
    z_alpha = normal_quantile(1.0 - design.alpha_level / 2.0)
    return (z_power + z_alpha) / math.sqrt(design.genotype_variance * events)


def solve_required_maf(events: float, theta: float, alpha_level: float, power: float) -> float:
    """Minor allele frequency in (0, 0.5] required for the target power.

    Inverts the event-count formula for the genotype variance and solves the
    quadratic 2p(1-p) = v in closed form, taking the root at or below 0.5.

    Raises:
        MafInfeasibleError: if the required genotype variance exceeds 0.5,
            which no allele frequency can provide.
        InfeasibleDesignError: if ``theta`` is zero.
    """
    if not events > 0.0:
        raise ValueError(f"events must be > 0, got {events}")
    if theta == 0.0:
        raise InfeasibleDesignError("overall effect is zero: no allele frequency suffices")
    if not 0.0 < alpha_level < 1.0:
        raise ValueError(f"alpha_level must be in (0, 1), got {alpha_level}")
    if not 0.0 < power < 1.0:
        raise ValueError(f"power must be in (0, 1), got {power}")
    z_sum = normal_quantile(power) + normal_quantile(1.0 - alpha_level / 2.0)
    needed_var = z_sum**2 / (events * theta**2)
    if needed_var > 0.5 + 1e-12:
        raise MafInfeasibleError(
            f"required genotype variance {needed_var:.6g} exceeds the maximum 0.5"
        )
    disc = max(0.0, 1.0 - 2.0 * needed_var)
    return (1.0 - math.sqrt(disc)) / 2.0
