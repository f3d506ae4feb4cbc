// Typed client for the forecast service. The UI talks to exactly the
// documented GET endpoints and surfaces the service's machine-readable
// error codes.

export interface District {
  name: string;
  latitude: number;
  longitude: number;
  models_available: string[];
}

export interface HistoryPoint {
  ts: string;
  vehicles: number;
}

export type CongestionLevel = "low" | "medium" | "high";

export interface ForecastPoint {
  ts: string;
  vehicles: number;
  level: CongestionLevel;
}

export interface ForecastResponse {
  district: string;
  model: string;
  generated_at: string;
  points: ForecastPoint[];
}

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.status = status;
  }
}

declare global {
  interface Window {
    SMARTJOURNEY_API_BASE?: string;
  }
}

export function apiBase(): string {
  if (typeof window !== "undefined") {
    if (window.SMARTJOURNEY_API_BASE) return window.SMARTJOURNEY_API_BASE;
    const fromQuery = new URLSearchParams(window.location.search).get("api");
    if (fromQuery) return fromQuery;
  }
  return "http://localhost:8000";
}

async function apiGet<T>(path: string, params: Record<string, string>, signal?: AbortSignal): Promise<T> {
  const url = new URL(path, apiBase());
  for (const [key, value] of Object.entries(params)) url.searchParams.set(key, value);
  let response: Response;
  try {
    response = await fetch(url.toString(), { signal });
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") throw err;
    throw new ApiError("network", "service unreachable", 0);
  }
  if (!response.ok) {
    const body = (await response.json().catch(() => ({}))) as { error?: string; message?: string };
    throw new ApiError(body.error ?? "unknown", body.message ?? response.statusText, response.status);
  }
  return response.json() as Promise<T>;
}

export function getDistricts(signal?: AbortSignal): Promise<District[]> {
  return apiGet<District[]>("/v1/districts", {}, signal);
}

export function getHistory(
  district: string,
  from: string,
  to: string,
  signal?: AbortSignal,
): Promise<HistoryPoint[]> {
  return apiGet<HistoryPoint[]>("/v1/history", { district, from, to }, signal);
}

export function getForecast(
  district: string,
  start: string,
  horizon: number,
  model: string,
  signal?: AbortSignal,
): Promise<ForecastResponse> {
  return apiGet<ForecastResponse>(
    "/v1/forecast",
    { district, start, horizon: String(horizon), model },
    signal,
  );
}
