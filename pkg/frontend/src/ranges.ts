// Validation ranges mirror the API exactly; slider bounds are the narrower
// ergonomic windows the panels expose.  Free-entry fields validate against
// the API ranges so the server never sees a value the client accepted.

export interface Range {
  min: number;
  max: number;
  minExclusive: boolean;
  maxExclusive: boolean;
}

export const API_RANGES: Record<string, Range> = {
  maf: { min: 0, max: 1, minExclusive: true, maxExclusive: true },
  alpha_level: { min: 0, max: 1, minExclusive: true, maxExclusive: true },
  power: { min: 0, max: 1, minExclusive: true, maxExclusive: true },
  events: { min: 0, max: Infinity, minExclusive: false, maxExclusive: false },
  event_rate: { min: 0, max: 1, minExclusive: true, maxExclusive: false },
};

export const SLIDERS = {
  maf: { min: 0.01, max: 0.5, step: 0.01 },
  effect: { min: -1, max: 1, step: 0.01 },
  power: { min: 0.5, max: 0.99, step: 0.01 },
};

export const ALPHA_PRESETS = [5e-2, 1e-2, 1e-4, 1e-6, 5e-8];

export function inRange(name: string, value: number): boolean {
  const r = API_RANGES[name];
  if (!r) return Number.isFinite(value);
  if (!Number.isFinite(value)) return false;
  if (r.minExclusive ? value <= r.min : value < r.min) return false;
  if (r.maxExclusive ? value >= r.max : value > r.max) return false;
  return true;
}

export function validateInputs(values: Record<string, number>): string[] {
  const problems: string[] = [];
  for (const [name, value] of Object.entries(values)) {
    if (!inRange(name, value)) {
      problems.push(`${name} out of range`);
    }
  }
  return problems;
}
