// Dependency-free SVG line chart: history in gray, forecast in blue, and a
// congestion color band behind each forecast hour. Forecast points always
// render to the right of the last history point.

import type { ForecastPoint, HistoryPoint } from "./api.js";

const WIDTH = 640;
const HEIGHT = 260;
const MARGIN = { top: 12, right: 16, bottom: 40, left: 56 };

export const LEVEL_COLORS: Record<string, string> = {
  low: "#2a9d3c",
  medium: "#e0a800",
  high: "#d23c2a",
};

export interface ChartData {
  history: HistoryPoint[];
  forecast: ForecastPoint[];
}

export function chartMax(data: ChartData): number {
  const values = [
    ...data.history.map((p) => p.vehicles),
    ...data.forecast.map((p) => p.vehicles),
  ];
  return values.length ? Math.max(...values) : 1;
}

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS("http://www.w3.org/2000/svg", tag);
}

export function renderChart(container: HTMLElement, data: ChartData, yMax?: number): SVGSVGElement {
  container.textContent = "";
  const svg = svgEl("svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "forecast-chart");

  const n = data.history.length + data.forecast.length;
  const top = yMax && yMax > 0 ? yMax : chartMax(data);
  const innerW = WIDTH - MARGIN.left - MARGIN.right;
  const innerH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const x = (i: number) => MARGIN.left + (n <= 1 ? 0 : (i / (n - 1)) * innerW);
  const y = (v: number) => MARGIN.top + innerH - (v / top) * innerH;

  const slotWidth = n <= 1 ? innerW : innerW / (n - 1);
  data.forecast.forEach((point, j) => {
    const i = data.history.length + j;
    const band = svgEl("rect");
    band.setAttribute("class", `band band-${point.level}`);
    band.setAttribute("x", String(x(i) - slotWidth / 2));
    band.setAttribute("width", String(slotWidth));
    band.setAttribute("y", String(MARGIN.top));
    band.setAttribute("height", String(innerH));
    band.setAttribute("fill", LEVEL_COLORS[point.level]);
    band.setAttribute("opacity", "0.18");
    svg.appendChild(band);
  });

  const lines: Array<[string, { vehicles: number }[], number]> = [
    ["history", data.history, 0],
    ["forecast", data.forecast, data.history.length],
  ];
  for (const [cls, points, offset] of lines) {
    if (!points.length) continue;
    const poly = svgEl("polyline");
    poly.setAttribute("class", cls);
    poly.setAttribute("fill", "none");
    poly.setAttribute("stroke", cls === "history" ? "#555" : "#2a6fb0");
    poly.setAttribute("stroke-width", "1.6");
    poly.setAttribute(
      "points",
      points.map((p, i) => `${x(offset + i).toFixed(1)},${y(p.vehicles).toFixed(1)}`).join(" "),
    );
    svg.appendChild(poly);
  }

  const axis = svgEl("text");
  axis.setAttribute("x", "4");
  axis.setAttribute("y", String(MARGIN.top + 10));
  axis.setAttribute("class", "y-max-label");
  axis.setAttribute("font-size", "11");
  axis.textContent = String(Math.round(top));
  svg.appendChild(axis);

  container.appendChild(svg);
  return svg;
}

export function renderTable(container: HTMLElement, forecast: ForecastPoint[]): void {
  container.textContent = "";
  const table = document.createElement("table");
  table.className = "forecast-table";
  const head = table.createTHead().insertRow();
  for (const label of ["hour", "vehicles", "congestion"]) {
    const th = document.createElement("th");
    th.textContent = label;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const point of forecast) {
    const row = body.insertRow();
    row.insertCell().textContent = point.ts.slice(11, 16);
    row.insertCell().textContent = String(Math.round(point.vehicles));
    const level = row.insertCell();
    level.textContent = point.level;
    level.className = `level level-${point.level}`;
  }
  container.appendChild(table);
}
