// Top-level app: district/date/hour/horizon/model form, the main forecast
// panel, and an optional second what-if panel sharing the y-axis.

import { getDistricts } from "./api.js";
import { chartMax } from "./chart.js";
import { ForecastPanel } from "./panel.js";
import { DEFAULT_HORIZON, DEFAULT_MODEL, isComplete } from "./state.js";
import type { QuerySelection } from "./state.js";

export class App {
  root: HTMLElement;
  main: ForecastPanel;
  compare: ForecastPanel | null = null;

  constructor(root: HTMLElement) {
    this.root = root;
    root.innerHTML = `
      <header>
        <h1>Smart Journey: traffic forecast explorer</h1>
        <div class="districts-error" hidden>
          <span class="districts-error-message"></span>
          <button type="button" class="retry-districts">Retry</button>
        </div>
      </header>
      <form class="query-form">
        <label>District
          <select name="district" required><option value="">–</option></select>
        </label>
        <label>Date <input name="date" type="date" required /></label>
        <label>Hour <input name="hour" type="number" min="0" max="23" value="8" required /></label>
        <label>Horizon <input name="horizon" type="number" min="1" max="48" value="${DEFAULT_HORIZON}" /></label>
        <label>Model
          <select name="model">
            <option value="gbdt" selected>gbdt</option>
            <option value="lstm">lstm</option>
            <option value="transformer">transformer</option>
          </select>
        </label>
        <button type="submit" class="run" disabled>Forecast</button>
        <button type="button" class="compare-toggle">Compare</button>
      </form>
      <div class="panels"></div>
    `;
    const panels = root.querySelector(".panels") as HTMLElement;
    this.main = new ForecastPanel(panels, "Forecast");

    this.form().addEventListener("submit", (event) => {
      event.preventDefault();
      void this.runActivePanel();
    });
    this.form().addEventListener("input", () => this.updateSubmitState());
    this.districtSelect().addEventListener("change", () => {
      // switching district reruns the active query exactly once
      if (this.selection()) void this.runActivePanel();
    });
    (root.querySelector(".retry-districts") as HTMLButtonElement).addEventListener(
      "click",
      () => void this.loadDistricts(),
    );
    (root.querySelector(".compare-toggle") as HTMLButtonElement).addEventListener(
      "click",
      () => this.toggleCompare(),
    );
  }

  form(): HTMLFormElement {
    return this.root.querySelector(".query-form") as HTMLFormElement;
  }

  districtSelect(): HTMLSelectElement {
    return this.form().elements.namedItem("district") as HTMLSelectElement;
  }

  private field(name: string): HTMLInputElement | HTMLSelectElement {
    return this.form().elements.namedItem(name) as HTMLInputElement | HTMLSelectElement;
  }

  selection(): QuerySelection | null {
    const partial = {
      district: this.field("district").value,
      date: this.field("date").value,
      hour: this.field("hour").value === "" ? undefined : Number(this.field("hour").value),
      horizon: Number(this.field("horizon").value) || DEFAULT_HORIZON,
      model: this.field("model").value || DEFAULT_MODEL,
    };
    return isComplete(partial) ? (partial as QuerySelection) : null;
  }

  updateSubmitState(): void {
    const button = this.form().querySelector(".run") as HTMLButtonElement;
    button.disabled = this.selection() === null;
  }

  async loadDistricts(): Promise<void> {
    const banner = this.root.querySelector(".districts-error") as HTMLElement;
    try {
      const districts = await getDistricts();
      const select = this.districtSelect();
      select.innerHTML = '<option value="">–</option>';
      for (const d of districts) {
        const option = document.createElement("option");
        option.value = d.name;
        option.textContent = d.name;
        select.appendChild(option);
      }
      banner.hidden = true;
    } catch {
      (banner.querySelector(".districts-error-message") as HTMLElement).textContent =
        "Could not load districts.";
      banner.hidden = false;
    }
  }

  activePanel(): ForecastPanel {
    return this.compare ?? this.main;
  }

  async runActivePanel(): Promise<void> {
    const selection = this.selection();
    if (!selection) return;
    await this.activePanel().run(selection);
    this.applySharedScale();
  }

  toggleCompare(): void {
    const panels = this.root.querySelector(".panels") as HTMLElement;
    if (this.compare) {
      this.compare.dispose();
      this.compare = null;
      this.main.setSharedMax(undefined);
      return;
    }
    this.compare = new ForecastPanel(panels, "What-if");
  }

  applySharedScale(): void {
    if (!this.compare) {
      this.main.setSharedMax(undefined);
      return;
    }
    const maxima = [this.main.data, this.compare.data]
      .filter((d): d is NonNullable<typeof d> => d !== null)
      .map(chartMax);
    const shared = maxima.length ? Math.max(...maxima) : undefined;
    this.main.setSharedMax(shared);
    this.compare.setSharedMax(shared);
  }
}

export async function bootstrap(root: HTMLElement): Promise<App> {
  const app = new App(root);
  await app.loadDistricts();
  app.updateSubmitState();
  return app;
}
