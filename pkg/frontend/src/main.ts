import { api } from "./api.js";
import { ComparePanel, PowerPanel, QuickSimulatePanel, SampleSizePanel } from "./panels.js";
import { ALPHA_PRESETS, SLIDERS } from "./ranges.js";
import { formatPower } from "./round.js";
import { DEFAULT_INPUTS, PRESETS, ScenarioStore, describeAlpha } from "./state.js";
import { ScenarioInputs } from "./types.js";

interface Control {
  read(): number;
}

function sliderWithNumber(
  doc: Document,
  label: string,
  min: number,
  max: number,
  step: number,
  value: number,
  onChange: () => void,
): { root: HTMLElement; control: Control; set(value: number): void } {
  const root = doc.createElement("label");
  root.className = "control";
  const caption = doc.createElement("span");
  caption.textContent = label;
  const slider = doc.createElement("input");
  slider.type = "range";
  slider.min = String(min);
  slider.max = String(max);
  slider.step = String(step);
  slider.value = String(value);
  const number = doc.createElement("input");
  number.type = "number";
  number.step = String(step);
  number.value = String(value);
  slider.addEventListener("input", () => {
    number.value = slider.value;
    onChange();
  });
  number.addEventListener("input", () => {
    slider.value = number.value;
    onChange();
  });
  root.append(caption, slider, number);
  return {
    root,
    control: { read: () => Number(number.value) },
    set(next: number) {
      slider.value = String(next);
      number.value = String(next);
    },
  };
}

export function mount(doc: Document): void {
  const app = doc.getElementById("app");
  if (!app) throw new Error("missing #app container");

  const store = new ScenarioStore();
  const powerPanel = new PowerPanel(doc, api, ALPHA_PRESETS.slice(0, 3));
  const sizePanel = new SampleSizePanel(doc, api);
  const comparePanel = new ComparePanel(doc, store);
  const simPanel = new QuickSimulatePanel(doc, api);

  const controls = doc.createElement("section");
  controls.className = "panel controls-panel";
  const title = doc.createElement("h2");
  title.className = "panel-title";
  title.textContent = "Design inputs";
  controls.appendChild(title);

  let scheduled: ReturnType<typeof setTimeout> | null = null;
  const refresh = () => {
    if (scheduled !== null) clearTimeout(scheduled);
    scheduled = setTimeout(() => {
      scheduled = null;
      const inputs = readInputs();
      void powerPanel.update(inputs);
      void sizePanel.update(inputs);
    }, 60);
  };

  const maf = sliderWithNumber(doc, "minor allele frequency", SLIDERS.maf.min, SLIDERS.maf.max, SLIDERS.maf.step, DEFAULT_INPUTS.maf, refresh);
  const theta = sliderWithNumber(doc, "overall effect", SLIDERS.effect.min, SLIDERS.effect.max, SLIDERS.effect.step, DEFAULT_INPUTS.theta ?? 0.175, refresh);
  const events = sliderWithNumber(doc, "events", 10, 2000, 1, DEFAULT_INPUTS.events, refresh);
  const power = sliderWithNumber(doc, "target power", SLIDERS.power.min, SLIDERS.power.max, SLIDERS.power.step, DEFAULT_INPUTS.power, refresh);
  const eventRate = sliderWithNumber(doc, "event rate (per subject)", 0.05, 1, 0.01, 0.61, refresh);

  const alphaLabel = doc.createElement("label");
  alphaLabel.className = "control";
  const alphaCaption = doc.createElement("span");
  alphaCaption.textContent = "significance level";
  const alphaSelect = doc.createElement("select");
  for (const level of ALPHA_PRESETS) {
    const option = doc.createElement("option");
    option.value = String(level);
    option.textContent = describeAlpha(level);
    alphaSelect.appendChild(option);
  }
  const custom = doc.createElement("option");
  custom.value = "custom";
  custom.textContent = "custom...";
  alphaSelect.appendChild(custom);
  const alphaFree = doc.createElement("input");
  alphaFree.type = "number";
  alphaFree.step = "any";
  alphaFree.value = "0.05";
  alphaFree.hidden = true;
  alphaSelect.addEventListener("change", () => {
    alphaFree.hidden = alphaSelect.value !== "custom";
    refresh();
  });
  alphaFree.addEventListener("input", refresh);
  alphaLabel.append(alphaCaption, alphaSelect, alphaFree);

  const readInputs = (): ScenarioInputs => ({
    maf: maf.control.read(),
    alpha_level: alphaSelect.value === "custom" ? Number(alphaFree.value) : Number(alphaSelect.value),
    events: events.control.read(),
    power: power.control.read(),
    event_rate: eventRate.control.read(),
    theta: theta.control.read(),
  });

  const presetRow = doc.createElement("div");
  presetRow.className = "preset-row";
  for (const [name, preset] of Object.entries(PRESETS)) {
    const button = doc.createElement("button");
    button.textContent = name;
    button.addEventListener("click", () => {
      maf.set(preset.maf);
      theta.set(preset.theta ?? 0.3);
      events.set(preset.events);
      power.set(preset.power);
      alphaSelect.value = String(preset.alpha_level);
      alphaFree.hidden = true;
      refresh();
    });
    presetRow.appendChild(button);
  }

  const saveButton = doc.createElement("button");
  saveButton.textContent = "save scenario";
  saveButton.addEventListener("click", async () => {
    const inputs = readInputs();
    const [powerResp, sizeResp] = await Promise.all([
      api.power({
        maf: inputs.maf,
        alpha_level: inputs.alpha_level,
        events: inputs.events,
        theta: inputs.theta,
      }),
      api.sampleSize({
        maf: inputs.maf,
        alpha_level: inputs.alpha_level,
        power: inputs.power,
        theta: inputs.theta,
      }),
    ]);
    store.save({
      name: `scenario ${store.list().length + 1} (power ${formatPower(powerResp.power)})`,
      inputs,
      power: powerResp.power,
      events_required: sizeResp.events,
    });
  });

  const simButton = doc.createElement("button");
  simButton.textContent = "quick empirical check (50 replicates)";
  simButton.addEventListener("click", () => {
    const inputs = readInputs();
    void simPanel.run({
      n_subjects: 400,
      maf: inputs.maf,
      alpha_level: inputs.alpha_level,
      replicates: 50,
      seed: 20240809,
      trajectory: {
        fixed_coeffs: [8.5, 0.1],
        snp_effect: 0.3,
        random_cov: [
          [2.0, -0.1],
          [-0.1, 0.1],
        ],
        error_var: 0.7,
      },
      hazard: {
        weibull_scale: 0.01,
        weibull_shape: 1.1,
        direct_effect: Math.max((inputs.theta ?? 0.175) - 0.25 * 0.3, -1),
        association: 0.25,
      },
      grid: { scenario: "S1", max_followup: 10.0 },
    });
  });

  controls.append(presetRow, maf.root, theta.root, events.root, power.root, eventRate.root, alphaLabel, saveButton, simButton);
  app.append(controls, powerPanel.root, sizePanel.root, simPanel.root, comparePanel.root);
  refresh();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document);
}
