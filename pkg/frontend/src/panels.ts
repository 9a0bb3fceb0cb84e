import { ApiClient } from "./api.js";
import { renderPowerChart } from "./chart.js";
import { LatestGuard, STALE } from "./latest.js";
import { formatPower } from "./round.js";
import { ALPHA_PRESETS, validateInputs } from "./ranges.js";
import { describeAlpha, ScenarioStore } from "./state.js";
import { ApiFailure, SavedScenario, ScenarioInputs, SimulateResponse } from "./types.js";

function el(doc: Document, tag: string, className: string, text = ""): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

function effectBody(inputs: ScenarioInputs): Record<string, number> {
  if (inputs.theta !== undefined) return { theta: inputs.theta };
  return {
    gamma_g: inputs.gamma_g ?? 0,
    alpha: inputs.alpha ?? 0,
    beta_g: inputs.beta_g ?? 0,
  };
}

/** Headline power for the current design plus power-versus-MAF curves, one
 *  series per significance level, with the 80% reference line. */
export class PowerPanel {
  readonly root: HTMLElement;
  private readonly guard = new LatestGuard();
  private readonly value: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly chartHost: HTMLElement;

  constructor(
    private readonly doc: Document,
    private readonly api: ApiClient,
    private readonly alphaLevels: number[] = [5e-2, 1e-4, 5e-8],
  ) {
    this.root = el(doc, "section", "panel power-panel");
    this.root.appendChild(el(doc, "h2", "panel-title", "Power"));
    this.value = el(doc, "div", "power-value", "--");
    this.banner = el(doc, "div", "error-banner");
    this.banner.hidden = true;
    this.chartHost = el(doc, "div", "chart-host");
    this.root.append(this.value, this.banner, this.chartHost);
  }

  async update(inputs: ScenarioInputs): Promise<void> {
    const problems = validateInputs({
      maf: inputs.maf,
      alpha_level: inputs.alpha_level,
      events: inputs.events,
    });
    if (problems.length > 0) {
      this.showError(problems.join("; "));
      return;
    }
    const mafGrid = Array.from({ length: 50 }, (_, i) => 0.01 + (i * (0.5 - 0.01)) / 49);
    let outcome;
    try {
      outcome = await this.guard.run(async (signal) => {
        const power = await this.api.power(
          {
            maf: inputs.maf,
            alpha_level: inputs.alpha_level,
            events: inputs.events,
            ...effectBody(inputs),
          },
          signal,
        );
        const curve = await this.api.curve(
          {
            events: inputs.events,
            ...effectBody(inputs),
            sweep: { name: "alpha_level", values: this.alphaLevels },
            x: { name: "maf", values: mafGrid },
          },
          signal,
        );
        return { power, curve };
      });
    } catch (err) {
      this.showError(err instanceof ApiFailure ? err.message : String(err));
      return;
    }
    if (outcome === STALE) return;
    this.banner.hidden = true;
    this.banner.textContent = "";
    this.value.textContent = formatPower(outcome.power.power);
    this.chartHost.replaceChildren(
      renderPowerChart(this.doc, outcome.curve.series, {
        x: "minor allele frequency",
        seriesName: (level) => `alpha ${describeAlpha(level)}`,
      }),
    );
  }

  private showError(message: string): void {
    // inputs and the last rendered numbers stay put; only the banner changes
    this.banner.hidden = false;
    this.banner.textContent = message;
  }
}

/** Required events for the target power, subjects given an event rate, and
 *  the smallest workable allele frequency for a fixed event budget. */
export class SampleSizePanel {
  readonly root: HTMLElement;
  private readonly guard = new LatestGuard();
  private readonly events: HTMLElement;
  private readonly subjects: HTMLElement;
  private readonly requiredMaf: HTMLElement;
  private readonly banner: HTMLElement;

  constructor(doc: Document, private readonly api: ApiClient) {
    this.root = el(doc, "section", "panel sample-size-panel");
    this.root.appendChild(el(doc, "h2", "panel-title", "Sample size"));
    this.events = el(doc, "div", "events-required", "--");
    this.subjects = el(doc, "div", "subjects-required");
    this.requiredMaf = el(doc, "div", "required-maf");
    this.banner = el(doc, "div", "error-banner");
    this.banner.hidden = true;
    this.root.append(this.events, this.subjects, this.requiredMaf, this.banner);
  }

  async update(inputs: ScenarioInputs): Promise<void> {
    let outcome;
    try {
      outcome = await this.guard.run(async (signal) => {
        const size = await this.api.sampleSize(
          {
            maf: inputs.maf,
            alpha_level: inputs.alpha_level,
            power: inputs.power,
            ...effectBody(inputs),
            ...(inputs.event_rate ? { event_rate: inputs.event_rate } : {}),
          },
          signal,
        );
        let mafText: string;
        try {
          const maf = await this.api.requiredMaf(
            {
              alpha_level: inputs.alpha_level,
              power: inputs.power,
              events: inputs.events,
              ...effectBody(inputs),
            },
            signal,
          );
          mafText = `smallest workable MAF for ${inputs.events} events: ${maf.maf.toFixed(3)}`;
        } catch (err) {
          if (err instanceof ApiFailure && err.infeasible) {
            mafText =
              "no allele frequency reaches the target power with this event budget " +
              "(genotype variance is capped at 0.5 when MAF = 0.5)";
          } else {
            throw err;
          }
        }
        return { size, mafText };
      });
    } catch (err) {
      this.banner.hidden = false;
      this.banner.textContent = err instanceof ApiFailure ? err.message : String(err);
      return;
    }
    if (outcome === STALE) return;
    this.banner.hidden = true;
    this.events.textContent = `events required: ${outcome.size.events.toFixed(1)} (plan for ${outcome.size.events_ceil})`;
    this.subjects.textContent =
      outcome.size.n !== undefined ? `subjects required: ${outcome.size.n}` : "";
    this.requiredMaf.textContent = outcome.mafText;
  }
}

/** Saved scenarios side by side with deltas against the first entry. */
export class ComparePanel {
  readonly root: HTMLElement;
  private readonly table: HTMLElement;

  constructor(private readonly doc: Document, store: ScenarioStore) {
    this.root = el(doc, "section", "panel compare-panel");
    this.root.appendChild(el(doc, "h2", "panel-title", "Scenario comparison"));
    this.table = el(doc, "div", "compare-table");
    this.root.appendChild(this.table);
    store.onChange((scenarios) => this.render(scenarios));
    this.render(store.list());
  }

  render(scenarios: SavedScenario[]): void {
    this.table.replaceChildren();
    if (scenarios.length === 0) {
      this.table.appendChild(el(this.doc, "p", "compare-empty", "no saved scenarios yet"));
      return;
    }
    const header = el(this.doc, "div", "compare-row compare-header");
    for (const title of ["scenario", "MAF", "alpha", "events", "power", "delta power"]) {
      header.appendChild(el(this.doc, "span", "compare-cell", title));
    }
    this.table.appendChild(header);
    const baseline = scenarios[0].power;
    for (const entry of scenarios) {
      const row = el(this.doc, "div", "compare-row");
      const delta = entry.power - baseline;
      const cells = [
        entry.name,
        entry.inputs.maf.toFixed(3),
        describeAlpha(entry.inputs.alpha_level),
        entry.inputs.events.toFixed(1),
        formatPower(entry.power),
        (delta >= 0 ? "+" : "") + delta.toFixed(3),
      ];
      for (const text of cells) row.appendChild(el(this.doc, "span", "compare-cell", text));
      this.table.appendChild(row);
    }
  }
}

/** Small synchronous simulation: empirical check against the calculated value. */
export class QuickSimulatePanel {
  readonly root: HTMLElement;
  private readonly guard = new LatestGuard();
  private readonly result: HTMLElement;
  private readonly banner: HTMLElement;

  constructor(doc: Document, private readonly api: ApiClient) {
    this.root = el(doc, "section", "panel quick-sim-panel");
    this.root.appendChild(el(doc, "h2", "panel-title", "Empirical check"));
    this.result = el(doc, "div", "sim-result", "run a quick simulation to check the formula");
    this.banner = el(doc, "div", "error-banner");
    this.banner.hidden = true;
    this.root.append(this.result, this.banner);
  }

  async run(body: unknown): Promise<SimulateResponse | null> {
    this.result.textContent = "simulating...";
    let outcome;
    try {
      outcome = await this.guard.run((signal) => this.api.simulate(body, signal));
    } catch (err) {
      this.banner.hidden = false;
      this.banner.textContent = err instanceof ApiFailure ? err.message : String(err);
      this.result.textContent = "simulation failed";
      return null;
    }
    if (outcome === STALE) return null;
    this.banner.hidden = true;
    const se = Math.sqrt(
      Math.max(outcome.empirical_power * (1 - outcome.empirical_power), 1e-9) /
        Math.max(outcome.replicates, 1),
    );
    this.result.textContent =
      `empirical ${formatPower(outcome.empirical_power)} +/- ${(1.96 * se).toFixed(3)} ` +
      `vs calculated ${formatPower(outcome.calculated_power)} ` +
      `(mean events ${outcome.d_bar.toFixed(1)}, ${outcome.replicates} replicates)`;
    return outcome;
  }
}

export { ALPHA_PRESETS };
