"""Power, sample size, and Monte Carlo validation for SNP effects on survival
outcomes linked to longitudinal biomarker trajectories."""

from snpdesign.design import (
    EffectParameters,
    GeneticDesign,
    HazardModel,
    InfeasibleDesignError,
    MafInfeasibleError,
    TrajectoryModel,
    detectable_effect,
    genotype_variance,
    normal_cdf,
    normal_quantile,
    overall_effect,
    power_given_events,
    required_events,
    solve_required_maf,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "EffectParameters",
    "GeneticDesign",
    "HazardModel",
    "InfeasibleDesignError",
    "MafInfeasibleError",
    "TrajectoryModel",
    "detectable_effect",
    "genotype_variance",
    "normal_cdf",
    "normal_quantile",
    "overall_effect",
    "power_given_events",
    "required_events",
    "solve_required_maf",
]
