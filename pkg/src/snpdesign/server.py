"""Stateless HTTP facade over the calculators and bounded simulation runs.

Every numeric result comes from the same code paths the CLI uses; responses
echo the validated inputs they were computed from and name the formula
("eq3" for event counts, "eq4" for power).  Validation problems return 400
with field-level messages.  Simulation requests run synchronously under a
hard replicate cap; batch-scale work belongs to the CLI.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, model_validator

from snpdesign import __version__
from snpdesign.design import (
    GeneticDesign,
    HazardModel,
    InfeasibleDesignError,
    MafInfeasibleError,
    TrajectoryModel,
    power_given_events,
    required_events,
    solve_required_maf,
)
from snpdesign.simulate import SimConfig, TimeGrid, VISIT_SCENARIOS
from snpdesign.studies import StudyFailure, StudySpec, empirical_power

MAX_SERIES = 5
MAX_POINTS = 200

SWEEP_NAMES = ("alpha_level", "maf", "gamma_g", "alpha", "followup")
X_NAMES = ("maf", "events", "n")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EffectMixin(_Strict):
    theta: Optional[float] = None
    gamma_g: Optional[float] = None
    alpha: Optional[float] = None
    beta_g: Optional[float] = None

    def resolved_theta(self) -> float:
        components = (self.gamma_g, self.alpha, self.beta_g)
        if self.theta is not None:
            if any(c is not None for c in components):
                raise ValueError("give either theta or (gamma_g, alpha, beta_g), not both")
            return self.theta
        if any(c is None for c in components):
            raise ValueError("need theta or all of gamma_g, alpha, beta_g")
        return self.gamma_g + self.alpha * self.beta_g


class PowerRequest(EffectMixin):
    maf: float = Field(gt=0.0, lt=1.0)
    alpha_level: float = Field(gt=0.0, lt=1.0)
    events: float = Field(ge=0.0)


class SampleSizeRequest(EffectMixin):
    maf: float = Field(gt=0.0, lt=1.0)
    alpha_level: float = Field(gt=0.0, lt=1.0)
    power: float = Field(gt=0.0, lt=1.0)
    event_rate: Optional[float] = Field(default=None, gt=0.0, le=1.0)


class RequiredMafRequest(EffectMixin):
    alpha_level: float = Field(gt=0.0, lt=1.0)
    power: float = Field(gt=0.0, lt=1.0)
    events: float = Field(gt=0.0)


class SweepSpec(_Strict):
    name: str
    values: list[float] = Field(min_length=1, max_length=MAX_SERIES)

    @model_validator(mode="after")
    def _known_name(self):
        if self.name not in SWEEP_NAMES:
            raise ValueError(f"sweep.name must be one of {SWEEP_NAMES}")
        return self


class XSpec(_Strict):
    name: str
    values: list[float] = Field(min_length=1, max_length=MAX_POINTS)

    @model_validator(mode="after")
    def _known_name(self):
        if self.name not in X_NAMES:
            raise ValueError(f"x.name must be one of {X_NAMES}")
        return self


class CurveRequest(EffectMixin):
    maf: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    alpha_level: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    events: Optional[float] = Field(default=None, gt=0.0)
    event_rate: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    d_bar: Optional[dict[str, float]] = None
    sweep: SweepSpec
    x: XSpec


class TrajectoryBody(_Strict):
    fixed_coeffs: list[float] = Field(min_length=1, max_length=3)
    snp_effect: float
    random_cov: list[list[float]]
    error_var: float = Field(gt=0.0)


class HazardBody(_Strict):
    weibull_scale: float = Field(gt=0.0)
    weibull_shape: float = Field(gt=0.0)
    direct_effect: float
    association: float


class GridBody(_Strict):
    scenario: str = "S1"
    max_followup: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _known_scenario(self):
        if self.scenario not in VISIT_SCENARIOS:
            raise ValueError(f"scenario must be one of {VISIT_SCENARIOS}")
        return self


class SimulateRequest(_Strict):
    n_subjects: int = Field(ge=1, le=20_000)
    maf: float = Field(gt=0.0, lt=1.0)
    alpha_level: float = Field(gt=0.0, lt=1.0, default=0.05)
    replicates: int = Field(ge=1)
    seed: int = 20240809
    degree: int = Field(ge=1, le=2, default=1)
    trajectory: TrajectoryBody
    hazard: HazardBody
    grid: GridBody


def _field_errors(exc: RequestValidationError):
    errors = []
    for err in exc.errors():
        location = ".".join(str(piece) for piece in err["loc"] if piece != "body")
        errors.append({"field": location or "body", "message": err["msg"]})
    return errors


def create_app(max_sim_reps: int = 200, workers: int = 1, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="snpdesign", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"errors": _field_errors(exc)})

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400, content={"errors": [{"field": "body", "message": str(exc)}]}
        )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/api/power")
    def api_power(body: PowerRequest):
        theta = body.resolved_theta()
        design = GeneticDesign(maf=body.maf, alpha_level=body.alpha_level)
        power = power_given_events(design, theta, body.events)
        return {
            "power": power,
            "theta": theta,
            "inputs": {
                "maf": body.maf,
                "alpha_level": body.alpha_level,
                "events": body.events,
                "theta": theta,
            },
            "formula": "eq4",
        }

    @app.post("/api/sample-size")
    def api_sample_size(body: SampleSizeRequest):
        theta = body.resolved_theta()
        design = GeneticDesign(maf=body.maf, alpha_level=body.alpha_level, power=body.power)
        try:
            events = required_events(design, theta)
        except InfeasibleDesignError as exc:
            raise ValueError(f"effect must be nonzero ({exc})")
        response = {
            "events": events,
            "events_ceil": math.ceil(events),
            "inputs": {
                "maf": body.maf,
                "alpha_level": body.alpha_level,
                "power": body.power,
                "theta": theta,
            },
            "formula": "eq3",
        }
        if body.event_rate is not None:
            response["n"] = math.ceil(events / body.event_rate)
            response["inputs"]["event_rate"] = body.event_rate
        return response

    @app.post("/api/required-maf")
    def api_required_maf(body: RequiredMafRequest):
        theta = body.resolved_theta()
        try:
            maf = solve_required_maf(body.events, theta, body.alpha_level, body.power)
        except MafInfeasibleError as exc:
            return JSONResponse(
                status_code=400,
                content={
                    "errors": [{"field": "events", "message": str(exc)}],
                    "infeasible": True,
                },
            )
        return {
            "maf": maf,
            "inputs": {
                "alpha_level": body.alpha_level,
                "power": body.power,
                "events": body.events,
                "theta": theta,
            },
            "formula": "eq3",
        }

    @app.post("/api/curve")
    def api_curve(body: CurveRequest):
        base_theta = None
        if body.sweep.name not in ("gamma_g", "alpha"):
            base_theta = body.resolved_theta()
        else:
            if body.theta is not None:
                raise ValueError(f"sweeping {body.sweep.name} needs effect components, not theta")
            needed = ("alpha", "beta_g") if body.sweep.name == "gamma_g" else ("gamma_g", "beta_g")
            for field_name in needed:
                if getattr(body, field_name) is None:
                    raise ValueError(f"sweeping {body.sweep.name} requires {field_name}")

        def cell(sweep_value: float, x_value: float) -> float:
            maf = body.maf
            alpha_level = body.alpha_level
            events = body.events
            theta = base_theta
            if body.sweep.name == "alpha_level":
                alpha_level = sweep_value
            elif body.sweep.name == "maf":
                maf = sweep_value
            elif body.sweep.name == "gamma_g":
                theta = sweep_value + body.alpha * body.beta_g
            elif body.sweep.name == "alpha":
                theta = body.gamma_g + sweep_value * body.beta_g
            elif body.sweep.name == "followup":
                if body.d_bar is None:
                    raise ValueError("followup sweeps need d_bar: {followup: events_per_subject}")
                rate = body.d_bar.get(f"{sweep_value:g}")
                if rate is None:
                    raise ValueError(f"d_bar is missing an entry for followup {sweep_value:g}")
                if body.x.name != "n":
                    raise ValueError("followup sweeps require x.name = 'n'")
                events = x_value * rate
            if body.x.name == "maf":
                maf = x_value
            elif body.x.name == "events":
                events = x_value
            elif body.x.name == "n" and body.sweep.name != "followup":
                if body.event_rate is None:
                    raise ValueError("x.name = 'n' needs event_rate (or a followup sweep with d_bar)")
                events = x_value * body.event_rate
            if maf is None:
                raise ValueError("maf is required unless swept or on the x axis")
            if alpha_level is None:
                raise ValueError("alpha_level is required unless swept")
            if events is None:
                raise ValueError("events is required unless derived from the x axis")
            if theta is None:
                raise ValueError("theta (or its components) is required")
            return power_given_events(GeneticDesign(maf=maf, alpha_level=alpha_level), theta, events)

        series = []
        for sweep_value in body.sweep.values:
            points = [
                {"x": x_value, "power": cell(sweep_value, x_value)}
                for x_value in sorted(body.x.values)
            ]
            series.append({"sweep_value": sweep_value, "points": points})
        return {
            "series": series,
            "inputs": body.model_dump(exclude_none=True),
            "formula": "eq4",
        }

    @app.post("/api/simulate")
    def api_simulate(body: SimulateRequest):
        if body.replicates > max_sim_reps:
            raise ValueError(f"replicates must be <= {max_sim_reps}")
        trajectory = TrajectoryModel(
            tuple(body.trajectory.fixed_coeffs),
            body.trajectory.snp_effect,
            np.asarray(body.trajectory.random_cov, dtype=float),
            body.trajectory.error_var,
        )
        hazard = HazardModel(
            body.hazard.weibull_scale,
            body.hazard.weibull_shape,
            body.hazard.direct_effect,
            body.hazard.association,
        )
        grid = TimeGrid.visit_scenario(body.grid.scenario, body.grid.max_followup)
        sim = SimConfig(body.n_subjects, trajectory, hazard, body.maf, grid, body.seed)
        spec = StudySpec(
            sim=sim,
            replicates=body.replicates,
            alpha_levels=(body.alpha_level,),
            workers=workers,
        )
        try:
            cell = empirical_power(spec)
        except StudyFailure as exc:
            return JSONResponse(
                status_code=500,
                content={"error": str(exc), "failures": exc.errors[:10]},
            )
        return {
            "d_bar": cell.d_bar,
            "empirical_power": cell.empirical_power["two_stage"][body.alpha_level],
            "calculated_power": cell.calculated_power[body.alpha_level],
            "replicates": cell.replicates_completed,
            "failures": cell.replicates_failed,
            "seed": body.seed,
            "theta": sim.overall_effect,
        }

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
