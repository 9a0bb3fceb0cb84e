"""Estimators of the overall SNP effect on survival.

``two_stage_test`` is the main analysis: fit the longitudinal model, strip the
estimated genotype shift from the responses, refit without the genotype to
predict each subject's genotype-free trajectory, then feed those predictions
into a Cox model alongside the genotype.  ``naive_cox`` ignores the
longitudinal process entirely (attenuated under trajectory-driven risk) and
``known_trajectory_cox`` uses the simulated truth as an oracle comparator.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from snpdesign.cox import CoxFit, build_counting_process, fit_cox
from snpdesign.lmm import LmmFit, adjust_responses, fit_lmm
from snpdesign.simulate import Cohort

__all__ = ["StageError", "TwoStageResult", "two_stage_test", "naive_cox", "known_trajectory_cox"]


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names the failing step."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


def _run_stage(stage: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except Exception as exc:
        raise StageError(stage, exc) from exc


@dataclass(frozen=True)
class TwoStageResult(CoxFit):
    """Cox fit carrying the stage-one fits it was built from."""

    full_fit: LmmFit | None = None
    reduced_fit: LmmFit | None = None

    @classmethod
    def from_parts(cls, cox: CoxFit, full_fit: LmmFit, reduced_fit: LmmFit):
        base = {f.name: getattr(cox, f.name) for f in fields(CoxFit)}
        return cls(**base, full_fit=full_fit, reduced_fit=reduced_fit)


def two_stage_test(
    cohort: Cohort,
    degree: int = 1,
    random_dim: int | None = None,
) -> TwoStageResult:
    """Two-stage estimate and Wald test of the overall SNP effect.

    Pipeline: full longitudinal fit, response adjustment by the estimated
    genotype shift, reduced (genotype-free) fit with subject trajectories,
    counting-process expansion with the fitted trajectory held constant
    within assessment intervals, Cox fit with coefficients ``snp`` (the
    overall effect) and ``trajectory``.

    Raises:
        StageError: any stage failure, labelled with the stage name.
    """
    full = _run_stage("stage1-full-lmm", fit_lmm, cohort, degree, True, random_dim)
    adjusted = _run_stage("stage1-adjust", adjust_responses, cohort, full.snp_effect)
    reduced = _run_stage("stage1-reduced-lmm", fit_lmm, adjusted, degree, False, random_dim)
    data = _run_stage(
        "stage2-counting-process", build_counting_process, cohort, "fitted-blup", reduced
    )
    cox = _run_stage("stage2-cox", fit_cox, data)
    return TwoStageResult.from_parts(cox, full, reduced)


def naive_cox(cohort: Cohort) -> CoxFit:
    """Cox fit with the genotype as the only covariate."""
    data = build_counting_process(cohort, "none")
    return fit_cox(data)


def known_trajectory_cox(cohort: Cohort) -> CoxFit:
    """Cox fit using the true genotype-free trajectory (simulation oracle)."""
    data = build_counting_process(cohort, "true-trajectory")
    return fit_cox(data)
