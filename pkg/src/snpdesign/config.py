"""Run configuration files: strict parsing and validation.

Configs are YAML with a required ``schema: snpdesign/v1`` marker and nested
sections mirroring the model types.  Unknown keys are rejected and every
violation names the offending key and its constraint, so presets fail loudly
rather than drifting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from snpdesign.design import HazardModel, TrajectoryModel
from snpdesign.simulate import SimConfig, TimeGrid, VISIT_SCENARIOS

SCHEMA = "snpdesign/v1"

KINDS = ("simulate", "validate", "curve", "retro")

SWEEPABLE = (
    "followup",
    "association",
    "direct_effect",
    "trajectory_effect",
    "maf",
    "weibull_scale",
    "alpha_level",
)

CELL_KEYS = (
    "n_subjects",
    "maf",
    "followup",
    "scenario",
    "association",
    "direct_effect",
    "trajectory_effect",
    "weibull_scale",
    "weibull_shape",
    "beta2",
    "error_var",
    "random_cov",
    "fixed_coeffs",
    "noise_scale_is_sd",
)


class ConfigError(ValueError):
    """A config file violated the schema; the message names key and constraint."""


def _fail(key: str, constraint: str):
    raise ConfigError(f"{key}: {constraint}")


def _section(raw: dict, key: str, required: bool = True) -> dict:
    value = raw.get(key)
    if value is None:
        if required:
            _fail(key, "section is required")
        return {}
    if not isinstance(value, dict):
        _fail(key, "must be a mapping")
    return value


def _no_unknown(mapping: dict, allowed, section: str):
    for key in mapping:
        if key not in allowed:
            _fail(f"{section}.{key}" if section else key, "unknown key")


def _number(mapping: dict, key: str, section: str, lo=None, hi=None,
            exclusive_lo=False, exclusive_hi=False, default=None, integer=False):
    value = mapping.get(key, default)
    if value is None:
        _fail(f"{section}.{key}", "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{section}.{key}", "must be a number")
    if integer and int(value) != value:
        _fail(f"{section}.{key}", "must be an integer")
    if lo is not None and (value <= lo if exclusive_lo else value < lo):
        _fail(f"{section}.{key}", f"must be {'>' if exclusive_lo else '>='} {lo}")
    if hi is not None and (value >= hi if exclusive_hi else value > hi):
        _fail(f"{section}.{key}", f"must be {'<' if exclusive_hi else '<='} {hi}")
    return int(value) if integer else float(value)


def _number_list(mapping: dict, key: str, section: str, default=None):
    value = mapping.get(key, default)
    if value is None:
        _fail(f"{section}.{key}", "is required")
    if not isinstance(value, (list, tuple)) or not value:
        _fail(f"{section}.{key}", "must be a nonempty list of numbers")
    out = []
    for i, entry in enumerate(value):
        if isinstance(entry, bool) or not isinstance(entry, (int, float)):
            _fail(f"{section}.{key}[{i}]", "must be a number")
        out.append(float(entry))
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of a config file plus per-run overrides."""

    kind: str
    seed: int
    replicates: int
    alpha_levels: tuple[float, ...]
    workers: int
    maf: float
    trajectory: TrajectoryModel
    hazard: HazardModel
    grid: TimeGrid
    n_subjects: int
    payload: dict = field(default_factory=dict)

    def sim_config(self, seed: int | None = None) -> SimConfig:
        return SimConfig(
            n_subjects=self.n_subjects,
            trajectory=self.trajectory,
            hazard=self.hazard,
            maf=self.maf,
            grid=self.grid,
            seed=self.seed if seed is None else seed,
        )


def _parse_trajectory(raw: dict) -> TrajectoryModel:
    section = _section(raw, "trajectory")
    _no_unknown(section, ("fixed_coeffs", "snp_effect", "random_cov", "error_var"), "trajectory")
    coeffs = _number_list(section, "fixed_coeffs", "trajectory")
    if not 1 <= len(coeffs) <= 3:
        _fail("trajectory.fixed_coeffs", "must have 1 to 3 entries")
    snp_effect = _number(section, "snp_effect", "trajectory")
    error_var = _number(section, "error_var", "trajectory", lo=0.0, exclusive_lo=True)
    cov_raw = section.get("random_cov")
    if not isinstance(cov_raw, list) or not cov_raw:
        _fail("trajectory.random_cov", "must be a square matrix (list of rows)")
    try:
        cov = np.asarray(cov_raw, dtype=float)
    except (TypeError, ValueError):
        _fail("trajectory.random_cov", "must contain numbers only")
    try:
        return TrajectoryModel(tuple(coeffs), snp_effect, cov, error_var)
    except ValueError as exc:
        raise ConfigError(f"trajectory: {exc}") from exc


def _parse_hazard(raw: dict) -> HazardModel:
    section = _section(raw, "hazard")
    allowed = ("weibull_scale", "weibull_shape", "direct_effect", "association")
    _no_unknown(section, allowed, "hazard")
    return HazardModel(
        weibull_scale=_number(section, "weibull_scale", "hazard", lo=0.0, exclusive_lo=True),
        weibull_shape=_number(section, "weibull_shape", "hazard", lo=0.0, exclusive_lo=True),
        direct_effect=_number(section, "direct_effect", "hazard"),
        association=_number(section, "association", "hazard"),
    )


def _parse_grid(raw: dict) -> TimeGrid:
    section = _section(raw, "grid")
    _no_unknown(
        section, ("scenario", "max_followup", "longitudinal_times", "survival_times"), "grid"
    )
    tau = _number(section, "max_followup", "grid", lo=0.0, exclusive_lo=True)
    scenario = section.get("scenario")
    if scenario is not None:
        if scenario not in VISIT_SCENARIOS:
            _fail("grid.scenario", f"must be one of {VISIT_SCENARIOS}")
        return TimeGrid.visit_scenario(scenario, tau)
    try:
        return TimeGrid(
            np.asarray(_number_list(section, "longitudinal_times", "grid"), dtype=float),
            np.asarray(_number_list(section, "survival_times", "grid"), dtype=float),
            tau,
        )
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _parse_cells(raw_cells, section: str) -> list[dict]:
    if not isinstance(raw_cells, list) or not raw_cells:
        _fail(f"{section}.cells", "must be a nonempty list of mappings")
    cells = []
    for i, cell in enumerate(raw_cells):
        if not isinstance(cell, dict):
            _fail(f"{section}.cells[{i}]", "must be a mapping")
        _no_unknown(cell, CELL_KEYS, f"{section}.cells[{i}]")
        cells.append(dict(cell))
    return cells


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    top_allowed = (
        "schema",
        "kind",
        "seed",
        "replicates",
        "alpha_levels",
        "workers",
        "n_subjects",
        "maf",
        "trajectory",
        "hazard",
        "grid",
        "simulate",
        "validate",
        "curve",
        "retro",
    )
    _no_unknown(raw, top_allowed, "")
    if raw.get("schema") != SCHEMA:
        _fail("schema", f"must be {SCHEMA!r}")
    kind = raw.get("kind")
    if kind not in KINDS:
        _fail("kind", f"must be one of {KINDS}")
    seed = _number(raw, "seed", "config", integer=True, default=20240809)
    replicates = _number(raw, "replicates", "config", lo=1, integer=True, default=500)
    workers = _number(raw, "workers", "config", lo=1, integer=True, default=1)
    alpha_levels = tuple(_number_list(raw, "alpha_levels", "config", default=[0.05]))
    for i, level in enumerate(alpha_levels):
        if not 0.0 < level < 1.0:
            _fail(f"alpha_levels[{i}]", "must be in (0, 1)")
    n_subjects = _number(raw, "n_subjects", "config", lo=1, integer=True, default=1000)
    maf = _number(raw, "maf", "config", lo=0.0, hi=1.0, exclusive_lo=True, exclusive_hi=True, default=0.3)

    trajectory = _parse_trajectory(raw)
    hazard = _parse_hazard(raw)
    grid = _parse_grid(raw)

    payload: dict = {}
    if kind == "simulate":
        section = _section(raw, "simulate", required=False)
        _no_unknown(section, ("cohorts",), "simulate")
        payload["cohorts"] = _number(section, "cohorts", "simulate", lo=1, integer=True, default=1)
    elif kind == "validate":
        section = _section(raw, "validate")
        _no_unknown(section, ("study", "degree", "random_dim", "cells", "beta2_values", "bias_cells"), "validate")
        study = section.get("study", "standard")
        if study not in ("standard", "bias", "misspecification"):
            _fail("validate.study", "must be standard, bias, or misspecification")
        payload["study"] = study
        payload["degree"] = _number(section, "degree", "validate", lo=1, hi=2, integer=True, default=1)
        random_dim = section.get("random_dim")
        if random_dim is not None:
            random_dim = _number(section, "random_dim", "validate", lo=1, hi=3, integer=True)
        payload["random_dim"] = random_dim
        if study == "standard":
            payload["cells"] = _parse_cells(section.get("cells", [{}]), "validate")
        elif study == "misspecification":
            payload["beta2_values"] = _number_list(
                section, "beta2_values", "validate", default=[0.1, 0.15, 0.2]
            )
        else:
            raw_cells = section.get("bias_cells", [[0.25, 0.01], [0.4, 0.001], [0.5, 0.001]])
            cells = []
            for i, pair in enumerate(raw_cells):
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    _fail(f"validate.bias_cells[{i}]", "must be [association, weibull_scale]")
                cells.append((float(pair[0]), float(pair[1])))
            payload["bias_cells"] = tuple(cells)
    elif kind == "curve":
        section = _section(raw, "curve")
        _no_unknown(section, ("sweep", "sample_sizes"), "curve")
        sweep = _section(section, "sweep")
        _no_unknown(sweep, ("parameter", "values"), "curve.sweep")
        parameter = sweep.get("parameter")
        if parameter not in SWEEPABLE or parameter == "alpha_level":
            _fail("curve.sweep.parameter", f"must be one of {tuple(p for p in SWEEPABLE if p != 'alpha_level')}")
        values = tuple(_number_list(sweep, "values", "curve.sweep"))
        sizes = [int(v) for v in _number_list(section, "sample_sizes", "curve",
                                              default=list(range(100, 1001, 100)))]
        payload.update({"parameter": parameter, "values": values, "sample_sizes": tuple(sizes)})
    else:  # retro
        section = _section(raw, "retro")
        _no_unknown(section, ("events", "theta", "maf_grid", "alpha_levels"), "retro")
        events_raw = section.get("events")
        if isinstance(events_raw, (int, float)) and not isinstance(events_raw, bool):
            events = [float(events_raw)]
        else:
            events = _number_list(section, "events", "retro")
        for i, d in enumerate(events):
            if d <= 0:
                _fail(f"retro.events[{i}]", "must be > 0")
        theta = _number(section, "theta", "retro")
        grid_raw = section.get("maf_grid")
        if isinstance(grid_raw, dict):
            _no_unknown(grid_raw, ("start", "stop", "count"), "retro.maf_grid")
            start = _number(grid_raw, "start", "retro.maf_grid", lo=0.0, exclusive_lo=True)
            stop = _number(grid_raw, "stop", "retro.maf_grid", hi=1.0, exclusive_hi=True)
            count = _number(grid_raw, "count", "retro.maf_grid", lo=2, integer=True)
            maf_grid = tuple(np.linspace(start, stop, count))
        else:
            maf_grid = tuple(_number_list(section, "maf_grid", "retro"))
        retro_alphas = tuple(_number_list(section, "alpha_levels", "retro", default=list(alpha_levels)))
        payload.update(
            {"events": events, "theta": theta, "maf_grid": maf_grid, "alpha_levels": retro_alphas}
        )

    return RunConfig(
        kind=kind,
        seed=seed,
        replicates=replicates,
        alpha_levels=alpha_levels,
        workers=workers,
        maf=maf,
        trajectory=trajectory,
        hazard=hazard,
        grid=grid,
        n_subjects=n_subjects,
        payload=payload,
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: invalid YAML ({exc})") from exc
    return parse_config(raw)
