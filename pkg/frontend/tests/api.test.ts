import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, getDistricts, getForecast, getHistory } from "../src/api.js";
import { DISTRICTS, installMockService } from "./helpers.js";

afterEach(() => vi.unstubAllGlobals());

describe("api client", () => {
  it("fetches districts", async () => {
    installMockService();
    const districts = await getDistricts();
    expect(districts).toHaveLength(6);
    expect(districts[0].name).toBe("TUZLA");
  });

  it("passes query parameters through", async () => {
    const { calls } = installMockService();
    await getHistory("TUZLA", "2020-09-18T09:00:00", "2020-09-20T08:00:00");
    await getForecast("TUZLA", "2020-09-20T08:00:00", 12, "gbdt");
    expect(calls[0].path).toBe("/v1/history");
    expect(calls[0].params.get("district")).toBe("TUZLA");
    expect(calls[1].params.get("horizon")).toBe("12");
  });

  it("surfaces the service error code", async () => {
    installMockService({
      "/v1/forecast": () => ({
        status: 409,
        body: { error: "insufficient_history", message: "too short" },
      }),
    });
    const failure = getForecast("TUZLA", "2020-09-20T08:00:00", 12, "gbdt");
    await expect(failure).rejects.toMatchObject({
      name: "ApiError",
      code: "insufficient_history",
      status: 409,
    });
  });

  it("maps network failures to a distinct code", async () => {
    installMockService({ "/v1/districts": () => "network" });
    try {
      await getDistricts();
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).code).toBe("network");
    }
  });

  it("returns typed forecast points", async () => {
    installMockService();
    const forecast = await getForecast("TUZLA", "2020-09-20T08:00:00", 6, "gbdt");
    expect(forecast.points).toHaveLength(6);
    expect(forecast.points[0].ts > "2020-09-20T08:00:00").toBe(true);
  });

  it("mock sanity: district fixture mirrors the registry", () => {
    expect(new Set(DISTRICTS.map((d) => d.name)).size).toBe(6);
  });
});
