"""Command-line interface: calculators, cohort simulation, studies, serving."""

from __future__ import annotations

import math
import os
import sys
from importlib import resources

import click

from snpdesign.config import ConfigError, RunConfig, load_config
from snpdesign.design import (
    GeneticDesign,
    InfeasibleDesignError,
    power_given_events,
    required_events,
)
from snpdesign.simulate import simulate_cohort, write_cohort
from snpdesign.studies import (
    StudyFailure,
    StudySpec,
    Sweep,
    bias_study,
    misspecification_study,
    power_curve,
    retrospective_power,
    validation_study,
    write_manifest,
    write_study_table,
)


def _resolve_theta(theta, gamma_g, alpha, beta_g) -> float:
    components = (gamma_g, alpha, beta_g)
    if theta is not None:
        if any(c is not None for c in components):
            raise click.UsageError("give either --theta or the three effect components, not both")
        return theta
    if any(c is None for c in components):
        raise click.UsageError("need --theta or all of --gamma-g, --alpha, --beta-g")
    return gamma_g + alpha * beta_g


def _resolve_config(config: str) -> str:
    if os.path.exists(config):
        return config
    name = config if config.endswith(".yaml") else f"{config}.yaml"
    preset = resources.files("snpdesign").joinpath("presets", name)
    if preset.is_file():
        return str(preset)
    raise click.UsageError(f"no config file or preset named {config!r}")


def _load(config: str) -> RunConfig:
    try:
        return load_config(_resolve_config(config))
    except ConfigError as exc:
        raise click.UsageError(str(exc))


def _apply_overrides(run: RunConfig, seed, replicates, workers) -> RunConfig:
    from dataclasses import replace

    if seed is not None:
        run = replace(run, seed=seed)
    if replicates is not None:
        run = replace(run, replicates=replicates)
    if workers is not None:
        run = replace(run, workers=workers)
    return run


@click.group()
@click.version_option(package_name="snpdesign")
def main():
    """Power and sample-size toolkit for genotype effects on survival outcomes."""


@main.command("power")
@click.option("--maf", type=float, required=True, help="Minor allele frequency in (0, 1).")
@click.option("--alpha-level", type=float, required=True, help="Two-sided significance level.")
@click.option("--events", type=float, required=True, help="Expected number of events.")
@click.option("--theta", type=float, default=None, help="Overall effect (log hazard per allele).")
@click.option("--gamma-g", type=float, default=None, help="Direct effect component.")
@click.option("--alpha", type=float, default=None, help="Trajectory association component.")
@click.option("--beta-g", type=float, default=None, help="Trajectory shift per allele component.")
def cmd_power(maf, alpha_level, events, theta, gamma_g, alpha, beta_g):
    """Power to detect the overall genotype effect with a given event count."""
    value = _resolve_theta(theta, gamma_g, alpha, beta_g)
    try:
        design = GeneticDesign(maf=maf, alpha_level=alpha_level)
        result = power_given_events(design, value, events)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    click.echo(f"{result:.4f}")


@main.command("sample-size")
@click.option("--maf", type=float, required=True)
@click.option("--alpha-level", type=float, required=True)
@click.option("--power", "target_power", type=float, required=True, help="Target power in (0, 1).")
@click.option("--theta", type=float, default=None)
@click.option("--gamma-g", type=float, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--beta-g", type=float, default=None)
@click.option("--event-rate", type=float, default=None,
              help="Expected events per subject; adds the implied cohort size.")
def cmd_sample_size(maf, alpha_level, target_power, theta, gamma_g, alpha, beta_g, event_rate):
    """Events (and optionally subjects) required for the target power."""
    value = _resolve_theta(theta, gamma_g, alpha, beta_g)
    try:
        design = GeneticDesign(maf=maf, alpha_level=alpha_level, power=target_power)
        events = required_events(design, value)
    except (InfeasibleDesignError, ValueError) as exc:
        raise click.UsageError(str(exc))
    click.echo(f"events_required={events:.4f}")
    click.echo(f"events_required_ceil={math.ceil(events)}")
    if event_rate is not None:
        if not 0.0 < event_rate <= 1.0:
            raise click.UsageError("--event-rate must be in (0, 1]")
        click.echo(f"n_subjects={math.ceil(events / event_rate)}")


_shared_run_options = [
    click.option("--output-dir", "-o", type=click.Path(), default="results", show_default=True),
    click.option("--seed", type=int, default=None, help="Override the config seed."),
    click.option("--replicates", type=int, default=None, help="Override the replicate count."),
    click.option("--workers", type=int, default=None, help="Worker processes for replicates."),
]


def _with_run_options(func):
    for option in reversed(_shared_run_options):
        func = option(func)
    return func


def _study_spec(run: RunConfig) -> StudySpec:
    return StudySpec(
        sim=run.sim_config(),
        replicates=run.replicates,
        alpha_levels=run.alpha_levels,
        workers=run.workers,
    )


@main.command("simulate")
@click.argument("config")
@_with_run_options
def cmd_simulate(config, output_dir, seed, replicates, workers):
    """Generate cohorts from a config file and export them as tables."""
    run = _apply_overrides(_load(config), seed, replicates, workers)
    if run.kind != "simulate":
        raise click.UsageError(f"config kind is {run.kind!r}, expected 'simulate'")
    os.makedirs(output_dir, exist_ok=True)
    outputs = []
    from dataclasses import replace

    for rep in range(run.payload["cohorts"]):
        cohort = simulate_cohort(replace(run.sim_config(), replicate=rep))
        long_path, surv_path = write_cohort(cohort, output_dir, basename=f"cohort_{rep:04d}")
        outputs += [os.path.basename(long_path), os.path.basename(surv_path)]
        click.echo(
            f"cohort {rep}: n={cohort.n_subjects} events={cohort.n_events} "
            f"event_fraction={cohort.n_events / cohort.n_subjects:.4f}"
        )
    write_manifest(
        os.path.join(output_dir, "manifest.json"), run.seed, {"kind": "simulate"}, outputs
    )


@main.command("validate")
@click.argument("config")
@_with_run_options
def cmd_validate(config, output_dir, seed, replicates, workers):
    """Run an empirical-vs-calculated power study (validation, bias, misspecification)."""
    run = _apply_overrides(_load(config), seed, replicates, workers)
    if run.kind != "validate":
        raise click.UsageError(f"config kind is {run.kind!r}, expected 'validate'")
    spec = _study_spec(run)
    study = run.payload["study"]
    from dataclasses import replace as _replace

    from snpdesign.studies import Analysis

    degree = run.payload.get("degree", 1)
    random_dim = run.payload.get("random_dim")
    spec = _replace(spec, analyses=(Analysis("two_stage", "two_stage", degree, random_dim),))
    os.makedirs(output_dir, exist_ok=True)
    status = "complete"
    try:
        if study == "standard":
            result = validation_study(spec, run.payload["cells"])
        elif study == "bias":
            result = bias_study(spec, run.payload["bias_cells"])
        else:
            result = misspecification_study(spec, run.payload["beta2_values"])
    except StudyFailure as exc:
        write_manifest(
            os.path.join(output_dir, "manifest.json"),
            run.seed,
            {"kind": "validate", "study": study},
            [],
            status="failed",
        )
        click.echo(f"study failed: {exc}", err=True)
        sys.exit(1)
    table = os.path.join(output_dir, f"{study}.csv")
    write_study_table(result, table)
    write_manifest(
        os.path.join(output_dir, "manifest.json"),
        run.seed,
        {"kind": "validate", "study": study},
        [os.path.basename(table)],
        status=status,
    )
    for cell in result.cells:
        for name, powers in sorted(cell.empirical_power.items()):
            first_level = run.alpha_levels[0]
            click.echo(
                f"cell {cell.params or '{base}'} [{name}]: d_bar={cell.d_bar:.2f} "
                f"empirical={powers[first_level]:.3f} "
                f"calculated={cell.calculated_power[first_level]:.3f} "
                f"failed={cell.replicates_failed}"
            )


@main.command("curve")
@click.argument("config")
@_with_run_options
def cmd_curve(config, output_dir, seed, replicates, workers):
    """Calculated power curves over a parameter sweep."""
    run = _apply_overrides(_load(config), seed, replicates, workers)
    if run.kind != "curve":
        raise click.UsageError(f"config kind is {run.kind!r}, expected 'curve'")
    spec = _study_spec(run)
    from dataclasses import replace as _replace

    spec = _replace(spec, sweep=Sweep(run.payload["parameter"], run.payload["values"]))
    os.makedirs(output_dir, exist_ok=True)
    result = power_curve(spec, run.payload["sample_sizes"])
    table = os.path.join(output_dir, "curve.csv")
    write_study_table(result, table)
    write_manifest(
        os.path.join(output_dir, "manifest.json"),
        run.seed,
        {"kind": "curve", "parameter": run.payload["parameter"]},
        [os.path.basename(table)],
    )
    for value in run.payload["values"]:
        rows = [c for c in result.cells if c.params[run.payload["parameter"]] == value]
        top = max(rows, key=lambda c: c.params["n_subjects"])
        click.echo(
            f"{run.payload['parameter']}={value}: n={top.params['n_subjects']} "
            f"d_bar={top.d_bar:.2f} power={top.calculated_power[run.alpha_levels[0]]:.3f}"
        )


@main.command("retro")
@click.argument("config")
@_with_run_options
def cmd_retro(config, output_dir, seed, replicates, workers):
    """Retrospective power surface from published event counts (no simulation)."""
    run = _apply_overrides(_load(config), seed, replicates, workers)
    if run.kind != "retro":
        raise click.UsageError(f"config kind is {run.kind!r}, expected 'retro'")
    os.makedirs(output_dir, exist_ok=True)
    outputs = []
    for events in run.payload["events"]:
        result = retrospective_power(
            events, run.payload["theta"], run.payload["maf_grid"], run.payload["alpha_levels"]
        )
        table = os.path.join(output_dir, f"retro_{int(round(events))}.csv")
        write_study_table(result, table)
        outputs.append(os.path.basename(table))
        for level in run.payload["alpha_levels"]:
            reachable = [
                c.params["maf"]
                for c in result.cells
                if c.params["alpha_level"] == level and c.calculated_power[level] >= 0.8
            ]
            threshold = f"maf>={min(reachable):.3f}" if reachable else "unreachable"
            click.echo(f"events={events:g} alpha={level:g}: 80% power {threshold}")
    write_manifest(
        os.path.join(output_dir, "manifest.json"),
        run.seed,
        {"kind": "retro", "theta": run.payload["theta"]},
        outputs,
    )


@main.command("presets")
def cmd_presets():
    """List bundled preset configurations."""
    folder = resources.files("snpdesign").joinpath("presets")
    for entry in sorted(p.name for p in folder.iterdir() if p.name.endswith(".yaml")):
        click.echo(entry.removesuffix(".yaml"))


@main.command("serve")
@click.option("--port", type=int, required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--max-sim-reps", type=int, default=200, show_default=True,
              help="Cap on replicates per simulation request.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Worker processes for simulation requests.")
@click.option("--static-dir", type=click.Path(exists=True), default=None,
              help="Serve a built frontend from this directory at /.")
def cmd_serve(port, host, max_sim_reps, workers, static_dir):
    """Serve the HTTP API (and optionally the web UI) until interrupted."""
    import uvicorn

    from snpdesign.server import create_app

    app = create_app(max_sim_reps=max_sim_reps, workers=workers, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except SystemExit as exc:  # uvicorn exits 1 when the port is taken
        raise exc
    except OSError as exc:
        click.echo(f"cannot bind port {port}: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
