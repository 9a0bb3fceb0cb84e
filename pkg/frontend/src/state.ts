import { SavedScenario, ScenarioInputs } from "./types.js";

export const DEFAULT_INPUTS: ScenarioInputs = {
  maf: 0.3,
  alpha_level: 0.05,
  events: 610.21,
  power: 0.8,
  theta: 0.175,
};

// Named scenarios for the published event counts: 315 events in the
// conventional arm, 232 in the intensive arm, overall effect 0.30.
export const PRESETS: Record<string, ScenarioInputs> = {
  "dcct-conventional": {
    maf: 0.3,
    alpha_level: 0.05,
    events: 315,
    power: 0.8,
    theta: 0.3,
  },
  "dcct-intensive": {
    maf: 0.3,
    alpha_level: 0.05,
    events: 232,
    power: 0.8,
    theta: 0.3,
  },
};

export class ScenarioStore {
  private saved: SavedScenario[] = [];
  private listeners: Array<(scenarios: SavedScenario[]) => void> = [];

  list(): SavedScenario[] {
    return [...this.saved];
  }

  save(entry: SavedScenario): void {
    this.saved = [...this.saved.filter((s) => s.name !== entry.name), entry];
    this.notify();
  }

  remove(name: string): void {
    this.saved = this.saved.filter((s) => s.name !== name);
    this.notify();
  }

  onChange(listener: (scenarios: SavedScenario[]) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.list());
  }
}

export function describeAlpha(level: number): string {
  if (level >= 0.01) return level.toString();
  return level.toExponential(0).replace("e-", "e-");
}
