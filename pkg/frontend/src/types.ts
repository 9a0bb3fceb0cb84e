export interface PowerResponse {
  power: number;
  theta: number;
  inputs: Record<string, number>;
  formula: string;
}

export interface SampleSizeResponse {
  events: number;
  events_ceil: number;
  n?: number;
  inputs: Record<string, number>;
  formula: string;
}

export interface RequiredMafResponse {
  maf: number;
  inputs: Record<string, number>;
  formula: string;
}

export interface CurvePoint {
  x: number;
  power: number;
}

export interface CurveSeries {
  sweep_value: number;
  points: CurvePoint[];
}

export interface CurveResponse {
  series: CurveSeries[];
  formula: string;
}

export interface SimulateResponse {
  d_bar: number;
  empirical_power: number;
  calculated_power: number;
  replicates: number;
  failures: number;
  seed: number;
  theta: number;
}

export interface ApiError {
  field: string;
  message: string;
}

export class ApiFailure extends Error {
  readonly errors: ApiError[];
  readonly infeasible: boolean;

  constructor(status: number, errors: ApiError[], infeasible = false) {
    super(errors.map((e) => `${e.field}: ${e.message}`).join("; ") || `HTTP ${status}`);
    this.errors = errors;
    this.infeasible = infeasible;
  }
}

export interface EffectInputs {
  theta?: number;
  gamma_g?: number;
  alpha?: number;
  beta_g?: number;
}

export interface ScenarioInputs extends EffectInputs {
  maf: number;
  alpha_level: number;
  events: number;
  power: number;
  event_rate?: number;
}

export interface SavedScenario {
  name: string;
  inputs: ScenarioInputs;
  power: number;
  events_required: number;
}
