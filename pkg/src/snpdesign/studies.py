"""Monte Carlo studies validating the closed-form power calculators.

Each study runs independent cohort replicates (optionally across worker
processes), summarizes event counts and estimator behavior, and pairs the
empirical rejection rate with the calculated power evaluated at the observed
mean event count.  Replicates are assigned result slots by index, so
aggregation is identical no matter how work is scheduled.  Failed replicates
are dropped and counted; a study aborts when more than ``max_failure_rate``
of them fail.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from snpdesign import __version__
from snpdesign.design import GeneticDesign, power_given_events
from snpdesign.simulate import SimConfig, TimeGrid, simulate_cohort
from snpdesign.twostage import known_trajectory_cox, naive_cox, two_stage_test

__all__ = [
    "Analysis",
    "StudySpec",
    "CellResult",
    "StudyResult",
    "StudyFailure",
    "empirical_power",
    "mean_events",
    "power_curve",
    "bias_study",
    "misspecification_study",
    "retrospective_power",
    "validation_study",
    "write_study_table",
    "write_manifest",
]

TABLE_COLUMNS = ("reps", "d_bar", "power_empirical", "power_calculated", "estimator", "coef", "mean", "sd")

BIAS_CELLS = ((0.25, 0.01), (0.4, 0.001), (0.5, 0.001))


class StudyFailure(RuntimeError):
    """Too many replicates failed; carries per-replicate diagnostics."""

    def __init__(self, message: str, errors: list[str]):
        super().__init__(message + (": " + "; ".join(errors[:5]) if errors else ""))
        self.errors = errors


@dataclass(frozen=True)
class Analysis:
    """One estimator applied to every replicate."""

    name: str
    estimator: str = "two_stage"  # two_stage | naive | known
    degree: int = 1
    random_dim: int | None = None


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class StudySpec:
    """A simulation template plus how to analyze and sweep it."""

    sim: SimConfig
    replicates: int
    alpha_levels: tuple[float, ...] = (0.05,)
    analyses: tuple[Analysis, ...] = (Analysis("two_stage"),)
    sweep: Sweep | None = None
    max_failure_rate: float = 0.05
    workers: int = 1

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        for level in self.alpha_levels:
            if not 0.0 < level < 1.0:
                raise ValueError(f"alpha level must be in (0, 1), got {level}")


@dataclass
class CellResult:
    params: dict
    replicates_requested: int
    replicates_completed: int
    replicates_failed: int
    d_bar: float
    empirical_power: dict
    calculated_power: dict
    estimator_stats: dict
    master_seed: int


@dataclass
class StudyResult:
    kind: str
    cells: list
    master_seed: int
    alpha_levels: tuple[float, ...]


def _replicate_task(payload):
    cfg, analyses = payload
    try:
        cohort = simulate_cohort(cfg)
        estimates = {}
        for spec in analyses:
            if spec.estimator == "two_stage":
                fit = two_stage_test(cohort, spec.degree, spec.random_dim)
            elif spec.estimator == "naive":
                fit = naive_cox(cohort)
            elif spec.estimator == "known":
                fit = known_trajectory_cox(cohort)
            else:
                raise ValueError(f"unknown estimator {spec.estimator!r}")
            estimates[spec.name] = {
                name: (
                    float(fit.coef[i]),
                    float(fit.se[i]),
                    float(fit.wald_z[i]),
                    float(fit.p_values[i]),
                )
                for i, name in enumerate(fit.coef_names)
            }
        return {"n_events": cohort.n_events, "estimates": estimates, "error": None}
    except Exception as exc:  # deliberate: failures become droppable outcomes
        return {"n_events": None, "estimates": None, "error": f"{type(exc).__name__}: {exc}"}


def _run_replicates(cfg: SimConfig, replicates: int, analyses, workers: int):
    payloads = [(replace(cfg, replicate=rep), tuple(analyses)) for rep in range(replicates)]
    if workers <= 1:
        return [_replicate_task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, replicates // (workers * 4))
        return list(pool.map(_replicate_task, payloads, chunksize=chunk))


def _summarize_cell(spec: StudySpec, cfg: SimConfig, params: dict, outcomes) -> CellResult:
    errors = [o["error"] for o in outcomes if o["error"] is not None]
    completed = [o for o in outcomes if o["error"] is None]
    if len(errors) > spec.max_failure_rate * len(outcomes):
        raise StudyFailure(
            f"{len(errors)}/{len(outcomes)} replicates failed in cell {params}", errors
        )
    if not completed:
        raise StudyFailure(f"no replicate completed in cell {params}", errors)
    d_bar = float(np.mean([o["n_events"] for o in completed]))
    theta = cfg.overall_effect
    calculated = {
        level: power_given_events(GeneticDesign(cfg.maf, level), theta, d_bar)
        for level in spec.alpha_levels
    }
    empirical: dict = {}
    stats: dict = {}
    for analysis in spec.analyses:
        rows = [o["estimates"][analysis.name] for o in completed]
        p_values = np.array([r["snp"][3] for r in rows])
        empirical[analysis.name] = {
            level: float(np.mean(p_values <= level)) for level in spec.alpha_levels
        }
        stats[analysis.name] = {
            coef: (
                float(np.mean([r[coef][0] for r in rows])),
                float(np.std([r[coef][0] for r in rows], ddof=1)) if len(rows) > 1 else 0.0,
            )
            for coef in rows[0]
        }
    return CellResult(
        params=params,
        replicates_requested=len(outcomes),
        replicates_completed=len(completed),
        replicates_failed=len(errors),
        d_bar=d_bar,
        empirical_power=empirical,
        calculated_power=calculated,
        estimator_stats=stats,
        master_seed=cfg.seed,
    )


def apply_parameter(cfg: SimConfig, name: str, value) -> SimConfig:
    """Return a config with one named parameter replaced.

    Supported names: n_subjects, maf, followup, scenario, association,
    direct_effect, trajectory_effect, weibull_scale, weibull_shape, beta2,
    error_var, random_cov, fixed_coeffs, noise_scale_is_sd.
    """
    if name == "n_subjects":
        return replace(cfg, n_subjects=int(value))
    if name == "maf":
        return replace(cfg, maf=float(value))
    if name == "noise_scale_is_sd":
        return replace(cfg, noise_scale_is_sd=bool(value))
    if name == "followup":
        if cfg.grid.scenario is None:
            raise ValueError("followup sweeps need a grid built from a visit scenario")
        return replace(cfg, grid=TimeGrid.visit_scenario(cfg.grid.scenario, float(value)))
    if name == "scenario":
        return replace(cfg, grid=TimeGrid.visit_scenario(str(value), cfg.grid.max_followup))
    if name in ("association", "direct_effect", "weibull_scale", "weibull_shape"):
        return replace(cfg, hazard=replace(cfg.hazard, **{name: float(value)}))
    if name == "trajectory_effect":
        return replace(cfg, trajectory=replace(cfg.trajectory, snp_effect=float(value)))
    if name in ("error_var",):
        return replace(cfg, trajectory=replace(cfg.trajectory, error_var=float(value)))
    if name == "beta2":
        coeffs = list(cfg.trajectory.fixed_coeffs[:2]) + [float(value)]
        return replace(cfg, trajectory=replace(cfg.trajectory, fixed_coeffs=tuple(coeffs)))
    if name == "fixed_coeffs":
        return replace(cfg, trajectory=replace(cfg.trajectory, fixed_coeffs=tuple(value)))
    if name == "random_cov":
        return replace(cfg, trajectory=replace(cfg.trajectory, random_cov=np.asarray(value, dtype=float)))
    raise ValueError(f"unknown sweep parameter {name!r}")


def _apply_overrides(cfg: SimConfig, overrides: dict) -> SimConfig:
    for key, value in overrides.items():
        cfg = apply_parameter(cfg, key, value)
    return cfg


def empirical_power(spec: StudySpec, overrides: dict | None = None) -> CellResult:
    """Empirical rejection rate of one cell, with D-bar and calculated power."""
    cfg = _apply_overrides(spec.sim, overrides or {})
    outcomes = _run_replicates(cfg, spec.replicates, spec.analyses, spec.workers)
    return _summarize_cell(spec, cfg, dict(overrides or {}), outcomes)


def _event_counts(cfg: SimConfig, replicates: int, workers: int) -> np.ndarray:
    payloads = [replace(cfg, replicate=rep) for rep in range(replicates)]
    if workers <= 1:
        return np.array([simulate_cohort(p).n_events for p in payloads], dtype=float)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, replicates // (workers * 4))
        return np.array(list(pool.map(_count_events_task, payloads, chunksize=chunk)), dtype=float)


def _count_events_task(cfg: SimConfig) -> int:
    return simulate_cohort(cfg).n_events


def mean_events(spec: StudySpec, overrides: dict | None = None) -> float:
    """Mean event count across replicates (no estimation)."""
    cfg = _apply_overrides(spec.sim, overrides or {})
    return float(_event_counts(cfg, spec.replicates, spec.workers).mean())


def power_curve(spec: StudySpec, sample_sizes=tuple(range(100, 1001, 100))) -> StudyResult:
    """Calculated power against sample size and mean events along a sweep.

    Event indicators are independent across subjects, so the mean event count
    scales exactly linearly in the cohort size; the per-subject event
    fraction is estimated once per sweep value at the template size and then
    rescaled to each requested ``n``.
    """
    if spec.sweep is None or not spec.sweep.values:
        raise ValueError("power_curve needs a sweep with at least one value")
    cells = []
    for value in spec.sweep.values:
        cfg = apply_parameter(spec.sim, spec.sweep.parameter, value)
        fraction = _event_counts(cfg, spec.replicates, spec.workers).mean() / cfg.n_subjects
        theta = cfg.overall_effect
        for n in sample_sizes:
            d_bar = fraction * n
            calculated = {
                level: power_given_events(GeneticDesign(cfg.maf, level), theta, d_bar)
                for level in spec.alpha_levels
            }
            cells.append(
                CellResult(
                    params={spec.sweep.parameter: value, "n_subjects": n},
                    replicates_requested=spec.replicates,
                    replicates_completed=spec.replicates,
                    replicates_failed=0,
                    d_bar=float(d_bar),
                    empirical_power={},
                    calculated_power=calculated,
                    estimator_stats={},
                    master_seed=cfg.seed,
                )
            )
    return StudyResult("power_curve", cells, spec.sim.seed, spec.alpha_levels)


def validation_study(spec: StudySpec, cells: list[dict]) -> StudyResult:
    """Empirical vs calculated power over explicit parameter cells."""
    results = [empirical_power(spec, overrides) for overrides in cells]
    return StudyResult("validation", results, spec.sim.seed, spec.alpha_levels)


def bias_study(spec: StudySpec, cells=BIAS_CELLS) -> StudyResult:
    """Estimator comparison across association strengths.

    The genotype must not influence the trajectory in the base template
    (``snp_effect = 0``); the baseline scale is re-paired with each
    association value to keep event counts comparable.
    """
    if spec.sim.trajectory.snp_effect != 0.0:
        raise ValueError("bias study requires snp_effect = 0 in the template")
    analyses = (
        Analysis("naive", "naive"),
        Analysis("known", "known"),
        Analysis("two_stage", "two_stage", spec.analyses[0].degree, spec.analyses[0].random_dim),
    )
    full = replace(spec, analyses=analyses)
    results = []
    for association, scale in cells:
        overrides = {"association": association, "weibull_scale": scale}
        results.append(empirical_power(full, overrides))
    return StudyResult("bias", results, spec.sim.seed, spec.alpha_levels)


def misspecification_study(spec: StudySpec, beta2_values=(0.1, 0.15, 0.2)) -> StudyResult:
    """True quadratic versus misspecified linear stage-one fits.

    The template must carry a quadratic trajectory; each cell overrides the
    curvature coefficient and analyzes every replicate twice.
    """
    if len(spec.sim.trajectory.fixed_coeffs) != 3:
        raise ValueError("misspecification study needs a quadratic trajectory template")
    analyses = (
        Analysis("two_stage_quadratic", "two_stage", degree=2, random_dim=3),
        Analysis("two_stage_linear", "two_stage", degree=1, random_dim=2),
    )
    full = replace(spec, analyses=analyses)
    results = [empirical_power(full, {"beta2": b2}) for b2 in beta2_values]
    return StudyResult("misspecification", results, spec.sim.seed, spec.alpha_levels)


def retrospective_power(events: float, theta: float, maf_grid, alpha_levels) -> StudyResult:
    """Formula-only power surface over allele frequency and significance level."""
    if events <= 0.0:
        raise ValueError("events must be > 0")
    cells = []
    for level in alpha_levels:
        for maf in maf_grid:
            power = power_given_events(GeneticDesign(float(maf), float(level)), theta, events)
            cells.append(
                CellResult(
                    params={"maf": float(maf), "alpha_level": float(level)},
                    replicates_requested=0,
                    replicates_completed=0,
                    replicates_failed=0,
                    d_bar=float(events),
                    empirical_power={},
                    calculated_power={level: power},
                    estimator_stats={},
                    master_seed=0,
                )
            )
    return StudyResult("retrospective", cells, 0, tuple(alpha_levels))


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_study_table(result: StudyResult, path: str) -> str:
    """Delimited study table, one row per (cell, alpha level, estimator, coefficient)."""
    param_names = sorted({name for cell in result.cells for name in cell.params})
    header = param_names + ["alpha_level"] + list(TABLE_COLUMNS)
    lines = [",".join(header)]
    for cell in result.cells:
        for level in result.alpha_levels or list(cell.calculated_power):
            if level not in cell.calculated_power:
                continue
            estimators = list(cell.estimator_stats) or [""]
            for estimator in estimators:
                coefs = list(cell.estimator_stats.get(estimator, {})) or [""]
                for coef in coefs:
                    mean, sd = cell.estimator_stats.get(estimator, {}).get(coef, ("", ""))
                    empirical = cell.empirical_power.get(estimator, {}).get(level, "")
                    row = [_format(cell.params.get(name, "")) for name in param_names]
                    row += [
                        _format(level),
                        str(cell.replicates_completed),
                        _format(cell.d_bar),
                        _format(empirical),
                        _format(cell.calculated_power[level]),
                        estimator,
                        coef,
                        _format(mean),
                        _format(sd),
                    ]
                    lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def spec_digest(payload) -> str:
    """Stable hash of a JSON-serializable study description."""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path: str, master_seed: int, spec_payload, outputs, status: str = "complete") -> str:
    import datetime

    manifest = {
        "master_seed": master_seed,
        "spec_hash": spec_digest(spec_payload),
        "version": __version__,
        "status": status,
        "outputs": list(outputs),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
