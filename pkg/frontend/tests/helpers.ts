// Mock service: fetch stub that serves canned bodies for the documented
// endpoints and records every request URL.

import { vi } from "vitest";

export interface MockCall {
  path: string;
  params: URLSearchParams;
}

export const DISTRICTS = [
  { name: "TUZLA", latitude: 40.8457, longitude: 29.3584, models_available: ["gbdt"] },
  { name: "BAGCILAR", latitude: 41.0356, longitude: 28.8534, models_available: [] },
  { name: "BUYUK_CEKMECE", latitude: 41.0223, longitude: 28.5749, models_available: [] },
  { name: "ATASEHIR", latitude: 40.9937, longitude: 29.1388, models_available: [] },
  { name: "KAGITHANE", latitude: 41.0822, longitude: 28.9862, models_available: [] },
  { name: "FATIH", latitude: 41.0151, longitude: 28.9551, models_available: [] },
];

function hourStamp(base: Date, offset: number): string {
  const t = new Date(base.getTime() + offset * 3600_000);
  const pad = (n: number) => String(n).padStart(2, "0");
  return (
    `${t.getUTCFullYear()}-${pad(t.getUTCMonth() + 1)}-${pad(t.getUTCDate())}` +
    `T${pad(t.getUTCHours())}:00:00`
  );
}

export function historyBody(to: string, hours = 48) {
  const end = new Date(`${to}Z`);
  return Array.from({ length: hours }, (_, i) => ({
    ts: hourStamp(end, i - hours + 1),
    vehicles: 800 + 10 * i,
  }));
}

export function forecastBody(district: string, start: string, horizon: number, model: string) {
  const base = new Date(`${start}Z`);
  const levels = ["low", "medium", "high"] as const;
  return {
    district,
    model,
    generated_at: start,
    points: Array.from({ length: horizon }, (_, i) => ({
      ts: hourStamp(base, i + 1),
      vehicles: 900 + 25 * i,
      level: levels[i % 3],
    })),
  };
}

type Responder = (call: MockCall) => { status: number; body: unknown } | "network";

export function installMockService(overrides: Partial<Record<string, Responder>> = {}) {
  const calls: MockCall[] = [];

  const fetchMock = vi.fn(async (input: string | URL, init?: RequestInit) => {
    const url = new URL(String(input));
    const call = { path: url.pathname, params: url.searchParams };
    calls.push(call);
    if (init?.signal?.aborted) {
      throw new DOMException("aborted", "AbortError");
    }

    const override = overrides[url.pathname];
    const outcome = override
      ? override(call)
      : defaultResponder(call);
    if (outcome === "network") throw new TypeError("fetch failed");
    return new Response(JSON.stringify(outcome.body), {
      status: outcome.status,
      headers: { "content-type": "application/json" },
    });
  });

  vi.stubGlobal("fetch", fetchMock);
  return { calls, fetchMock };
}

export function defaultResponder(call: MockCall): { status: number; body: unknown } {
  if (call.path === "/v1/districts") return { status: 200, body: DISTRICTS };
  if (call.path === "/v1/history") {
    return { status: 200, body: historyBody(call.params.get("to")!) };
  }
  if (call.path === "/v1/forecast") {
    return {
      status: 200,
      body: forecastBody(
        call.params.get("district")!,
        call.params.get("start")!,
        Number(call.params.get("horizon") ?? "12"),
        call.params.get("model") ?? "gbdt",
      ),
    };
  }
  return { status: 404, body: { error: "not_found", message: call.path } };
}

export function fillForm(root: HTMLElement, district = "TUZLA"): void {
  const form = root.querySelector(".query-form") as HTMLFormElement;
  (form.elements.namedItem("district") as HTMLSelectElement).value = district;
  (form.elements.namedItem("date") as HTMLInputElement).value = "2020-09-20";
  (form.elements.namedItem("hour") as HTMLInputElement).value = "8";
}

export function submit(root: HTMLElement): void {
  const form = root.querySelector(".query-form") as HTMLFormElement;
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export async function settle(): Promise<void> {
  // Response.json() schedules macrotasks; tick the event loop a few times
  for (let i = 0; i < 5; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
