import {
  ApiFailure,
  CurveResponse,
  PowerResponse,
  RequiredMafResponse,
  SampleSizeResponse,
  SimulateResponse,
} from "./types.js";

declare global {
  interface Window {
    SNPDESIGN_API?: string;
  }
}

function base(): string {
  return (typeof window !== "undefined" && window.SNPDESIGN_API) || "";
}

async function post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
  const resp = await fetch(`${base()}${path}`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
    signal,
  });
  if (!resp.ok) {
    let errors = [{ field: "request", message: `HTTP ${resp.status}` }];
    let infeasible = false;
    try {
      const payload = await resp.json();
      if (Array.isArray(payload.errors)) errors = payload.errors;
      infeasible = Boolean(payload.infeasible);
    } catch {
      // non-JSON error body: keep the status message
    }
    throw new ApiFailure(resp.status, errors, infeasible);
  }
  return resp.json() as Promise<T>;
}

export interface ApiClient {
  power(body: unknown, signal?: AbortSignal): Promise<PowerResponse>;
  sampleSize(body: unknown, signal?: AbortSignal): Promise<SampleSizeResponse>;
  requiredMaf(body: unknown, signal?: AbortSignal): Promise<RequiredMafResponse>;
  curve(body: unknown, signal?: AbortSignal): Promise<CurveResponse>;
  simulate(body: unknown, signal?: AbortSignal): Promise<SimulateResponse>;
}

export const api: ApiClient = {
  power: (body, signal) => post<PowerResponse>("/api/power", body, signal),
  sampleSize: (body, signal) => post<SampleSizeResponse>("/api/sample-size", body, signal),
  requiredMaf: (body, signal) => post<RequiredMafResponse>("/api/required-maf", body, signal),
  curve: (body, signal) => post<CurveResponse>("/api/curve", body, signal),
  simulate: (body, signal) => post<SimulateResponse>("/api/simulate", body, signal),
};
