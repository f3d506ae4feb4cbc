// One forecast panel: owns its fetch lifecycle (at most one in-flight
// query; newer submissions cancel older ones) and renders exactly one of
// the states idle / loading / error / result.

import { ApiError, getForecast, getHistory } from "./api.js";
import type { ForecastResponse, HistoryPoint } from "./api.js";
import { renderChart, renderTable } from "./chart.js";
import type { ChartData } from "./chart.js";
import { errorMessage, historyRange, startTimestamp } from "./state.js";
import type { QuerySelection } from "./state.js";

export type PanelState = "idle" | "loading" | "error" | "result";

export class ForecastPanel {
  readonly root: HTMLElement;
  state: PanelState = "idle";
  errorCode: string | null = null;
  data: ChartData | null = null;
  private controller: AbortController | null = null;
  private yMax?: number;

  constructor(container: HTMLElement, title: string) {
    this.root = document.createElement("section");
    this.root.className = "panel";
    this.root.innerHTML = `
      <h2 class="panel-title"></h2>
      <div class="panel-status" data-state="idle">Pick a district, date, and hour.</div>
      <div class="panel-chart"></div>
      <div class="panel-table"></div>
    `;
    this.root.querySelector(".panel-title")!.textContent = title;
    container.appendChild(this.root);
  }

  private status(): HTMLElement {
    return this.root.querySelector(".panel-status") as HTMLElement;
  }

  private setState(state: PanelState, message = ""): void {
    this.state = state;
    const el = this.status();
    el.dataset.state = state;
    if (this.errorCode) el.dataset.errorCode = this.errorCode;
    else delete el.dataset.errorCode;
    el.textContent = message;
  }

  dispose(): void {
    this.controller?.abort();
    this.root.remove();
  }

  clearRender(): void {
    (this.root.querySelector(".panel-chart") as HTMLElement).textContent = "";
    (this.root.querySelector(".panel-table") as HTMLElement).textContent = "";
  }

  async run(selection: QuerySelection): Promise<void> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    this.errorCode = null;
    this.setState("loading", "Loading forecast…");

    const start = startTimestamp(selection);
    const { from, to } = historyRange(selection);
    try {
      const [history, forecast] = await Promise.all([
        getHistory(selection.district, from, to, controller.signal),
        getForecast(selection.district, start, selection.horizon, selection.model, controller.signal),
      ]);
      if (controller.signal.aborted) return;
      this.renderResult(history, forecast);
    } catch (err) {
      if (controller.signal.aborted) return;
      if (err instanceof ApiError) {
        this.errorCode = err.code;
        this.setState("error", errorMessage(err.code, err.message));
      } else if (err instanceof DOMException && err.name === "AbortError") {
        return;
      } else {
        this.errorCode = "unknown";
        this.setState("error", errorMessage("unknown", String(err)));
      }
      this.clearRender();
      this.data = null;
    }
  }

  private renderResult(history: HistoryPoint[], forecast: ForecastResponse): void {
    this.data = { history, forecast: forecast.points };
    this.setState(
      "result",
      `${forecast.points.length} h forecast for ${forecast.district} (${forecast.model})`,
    );
    this.render();
  }

  setSharedMax(yMax?: number): void {
    this.yMax = yMax;
    if (this.data) this.render();
  }

  private render(): void {
    if (!this.data) return;
    renderChart(this.root.querySelector(".panel-chart") as HTMLElement, this.data, this.yMax);
    renderTable(this.root.querySelector(".panel-table") as HTMLElement, this.data.forecast);
  }
}
