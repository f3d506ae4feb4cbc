import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { bootstrap } from "../src/app.js";
import { ERROR_MESSAGES } from "../src/state.js";
import {
  defaultResponder,
  fillForm,
  forecastBody,
  installMockService,
  settle,
  submit,
} from "./helpers.js";

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app") as HTMLElement;
});

afterEach(() => vi.unstubAllGlobals());

describe("district loading", () => {
  it("lists the six districts", async () => {
    installMockService();
    await bootstrap(root);
    const options = root.querySelectorAll("select[name=district] option");
    expect(options).toHaveLength(7); // placeholder + 6
    expect([...options].map((o) => o.textContent)).toContain("TUZLA");
  });

  it("shows a retryable error banner when the service is down", async () => {
    let down = true;
    installMockService({
      "/v1/districts": (call) => (down ? "network" : defaultResponder(call)),
    });
    const app = await bootstrap(root);
    const banner = root.querySelector(".districts-error") as HTMLElement;
    expect(banner.hidden).toBe(false);

    down = false;
    (root.querySelector(".retry-districts") as HTMLButtonElement).click();
    await settle();
    expect(banner.hidden).toBe(true);
    expect(app.districtSelect().options).toHaveLength(7);
  });

  it("keeps submit disabled until district and start are chosen", async () => {
    installMockService();
    const app = await bootstrap(root);
    const button = root.querySelector(".run") as HTMLButtonElement;
    expect(button.disabled).toBe(true);
    fillForm(root);
    app.updateSubmitState();
    expect(button.disabled).toBe(false);
  });
});

describe("forecast flow", () => {
  it("renders 12 forecast points after 48 history points", async () => {
    installMockService();
    await bootstrap(root);
    fillForm(root);
    submit(root);
    await settle();

    const chart = root.querySelector(".panel-chart svg") as SVGSVGElement;
    const history = chart.querySelector("polyline.history")!;
    const forecast = chart.querySelector("polyline.forecast")!;
    const historyPts = history.getAttribute("points")!.trim().split(" ");
    const forecastPts = forecast.getAttribute("points")!.trim().split(" ");
    expect(historyPts).toHaveLength(48);
    expect(forecastPts).toHaveLength(12);
    // forecast renders strictly after the last history point on the x axis
    const lastHistoryX = Number(historyPts.at(-1)!.split(",")[0]);
    for (const pt of forecastPts) {
      expect(Number(pt.split(",")[0])).toBeGreaterThan(lastHistoryX);
    }
    // per-hour table lists each forecast point
    expect(root.querySelectorAll(".panel-table tbody tr")).toHaveLength(12);
  });

  it("issues only the documented endpoints", async () => {
    const { calls } = installMockService();
    await bootstrap(root);
    fillForm(root);
    submit(root);
    await settle();
    const allowed = new Set(["/v1/districts", "/v1/history", "/v1/forecast"]);
    for (const call of calls) {
      expect(allowed.has(call.path)).toBe(true);
    }
  });

  it("switching district triggers exactly one refetch", async () => {
    const { calls } = installMockService();
    const app = await bootstrap(root);
    fillForm(root);
    submit(root);
    await settle();
    const before = calls.filter((c) => c.path === "/v1/forecast").length;
    expect(before).toBe(1);

    app.districtSelect().value = "FATIH";
    app.districtSelect().dispatchEvent(new Event("change", { bubbles: true }));
    await settle();
    const after = calls.filter((c) => c.path === "/v1/forecast").length;
    expect(after).toBe(2);
    expect(calls.at(-1)!.params.get("district")).toBe("FATIH");
  });

  it("maps every service error code to its own message", async () => {
    const codes = Object.keys(ERROR_MESSAGES).filter((c) => c !== "network");
    const rendered: string[] = [];
    for (const code of codes) {
      vi.unstubAllGlobals();
      installMockService({
        "/v1/forecast": () => ({ status: 400, body: { error: code, message: code } }),
      });
      document.body.innerHTML = '<div id="app"></div>';
      root = document.getElementById("app") as HTMLElement;
      await bootstrap(root);
      fillForm(root);
      submit(root);
      await settle();
      const status = root.querySelector(".panel-status") as HTMLElement;
      expect(status.dataset.state).toBe("error");
      expect(status.dataset.errorCode).toBe(code);
      expect(status.textContent).toBe(ERROR_MESSAGES[code]);
      rendered.push(status.textContent!);
    }
    expect(new Set(rendered).size).toBe(codes.length); // all distinct
  });

  it("renders insufficient history as its dedicated message", async () => {
    installMockService({
      "/v1/forecast": () => ({
        status: 409,
        body: { error: "insufficient_history", message: "nope" },
      }),
    });
    await bootstrap(root);
    fillForm(root);
    submit(root);
    await settle();
    expect(root.querySelector(".panel-status")!.textContent).toBe(
      "Not enough history before this hour.",
    );
  });

  it("a newer submission cancels the inflight one", async () => {
    // the first response is tagged "stale"; the rerun must win the render
    let first = true;
    installMockService({
      "/v1/forecast": (call) => {
        if (first) {
          first = false;
          return { status: 200, body: forecastBody("TUZLA", "2020-09-20T08:00:00", 12, "stale") };
        }
        return defaultResponder(call);
      },
    });
    const app = await bootstrap(root);
    fillForm(root);
    const stale = app.main.run(app.selection()!);
    const fresh = app.main.run(app.selection()!);
    await Promise.all([stale, fresh]);
    await settle();
    expect(app.main.state).toBe("result");
    const status = root.querySelector(".panel-status") as HTMLElement;
    expect(status.textContent).toContain("(gbdt)");
    expect(status.textContent).not.toContain("stale");
  });
});

describe("what-if comparison", () => {
  async function setupTwoPanels() {
    installMockService();
    const app = await bootstrap(root);
    fillForm(root);
    submit(root);
    await settle();
    (root.querySelector(".compare-toggle") as HTMLButtonElement).click();
    fillForm(root, "FATIH");
    submit(root);
    await settle();
    return app;
  }

  it("renders two panels side by side with a shared y-axis", async () => {
    await setupTwoPanels();
    const panels = root.querySelectorAll(".panel");
    expect(panels).toHaveLength(2);
    const labels = [...root.querySelectorAll(".y-max-label")].map((el) => el.textContent);
    expect(labels).toHaveLength(2);
    expect(labels[0]).toBe(labels[1]);
  });

  it("one panel erroring leaves the other rendered", async () => {
    installMockService();
    const app = await bootstrap(root);
    fillForm(root);
    submit(root);
    await settle();

    vi.unstubAllGlobals();
    installMockService({
      "/v1/forecast": () => ({ status: 404, body: { error: "artifact_not_found", message: "" } }),
    });
    (root.querySelector(".compare-toggle") as HTMLButtonElement).click();
    fillForm(root, "FATIH");
    submit(root);
    await settle();

    expect(app.main.state).toBe("result");
    expect(root.querySelectorAll(".panel-chart svg")).toHaveLength(1);
    const statuses = [...root.querySelectorAll(".panel-status")];
    expect(statuses[1].getAttribute("data-state")).toBe("error");
  });

  it("clearing the second panel returns to single-query mode", async () => {
    const app = await setupTwoPanels();
    (root.querySelector(".compare-toggle") as HTMLButtonElement).click();
    expect(root.querySelectorAll(".panel")).toHaveLength(1);
    expect(app.compare).toBeNull();
  });
});
