// Demography explorer: a colored lat/lon grid for one month plus the monthly
// series for one cell. Every number shown is a field from the API rows; the
// count/relative-frequency toggle only switches which field is displayed.

import { el, clear } from "../dom";
import type { DemographyRow } from "../types";

export const BIAS_CAVEAT =
  "Counts reflect observer effort and visibility, not population size. " +
  "Use the relative-frequency index for comparisons across cells and months, " +
  "and treat every figure as a biased sample, never a census.";

export type DemographyMetric = "count" | "relative_frequency";

export function metricValue(row: DemographyRow, metric: DemographyMetric): number {
  return metric === "count" ? row.count : row.relative_frequency;
}

export function monthKey(row: DemographyRow): string {
  return `${row.year}-${String(row.month).padStart(2, "0")}`;
}

export function cellKey(row: DemographyRow): string {
  return `${row.lat_idx}/${row.lon_idx}`;
}

export interface DemographyView {
  element: HTMLElement;
  setMetric(metric: DemographyMetric): void;
  selectMonth(key: string): void;
  selectCell(key: string): void;
}

export function renderDemography(rows: DemographyRow[]): DemographyView {
  const element = el("div", { class: "demography" });
  element.append(el("p", { class: "bias-caveat", text: BIAS_CAVEAT }));

  const months = [...new Set(rows.map(monthKey))].sort();
  const cells = [...new Set(rows.map(cellKey))].sort();
  let metric: DemographyMetric = "count";
  let month = months[0] ?? "";
  let cell = cells[0] ?? "";

  if (rows.length === 0) {
    element.append(el("p", { class: "empty", text: "no occurrences for this taxon" }));
    return {
      element,
      setMetric: () => undefined,
      selectMonth: () => undefined,
      selectCell: () => undefined,
    };
  }

  const toggle = el("div", { class: "metric-toggle" });
  const countButton = el("button", { type: "button", text: "raw counts", class: "active" });
  const freqButton = el("button", { type: "button", text: "relative frequency" });
  countButton.addEventListener("click", () => setMetric("count"));
  freqButton.addEventListener("click", () => setMetric("relative_frequency"));
  toggle.append(countButton, freqButton);

  const monthSelect = el("select", { class: "month-select" });
  for (const key of months) {
    monthSelect.append(el("option", { value: key, text: key }));
  }
  monthSelect.addEventListener("change", () => selectMonth(monthSelect.value));

  const grid = el("div", { class: "cell-grid" });
  const series = el("div", { class: "month-series" });
  element.append(toggle, el("label", {}, "month: ", monthSelect), grid, series);

  function redrawGrid(): void {
    clear(grid);
    const visible = rows.filter((r) => monthKey(r) === month);
    if (visible.length === 0) return;
    const latRange = visible.map((r) => r.lat_idx);
    const lonRange = visible.map((r) => r.lon_idx);
    const latMin = Math.min(...latRange);
    const latMax = Math.max(...latRange);
    const lonMin = Math.min(...lonRange);
    const lonMax = Math.max(...lonRange);
    const peak = Math.max(...visible.map((r) => metricValue(r, metric)));
    grid.style.display = "grid";
    grid.style.gridTemplateColumns = `repeat(${lonMax - lonMin + 1}, 2.6em)`;
    // rows from north (max lat) down to south
    for (let lat = latMax; lat >= latMin; lat--) {
      for (let lon = lonMin; lon <= lonMax; lon++) {
        const row = visible.find((r) => r.lat_idx === lat && r.lon_idx === lon);
        if (!row) {
          grid.append(el("div", { class: "cell cell-empty" }));
          continue;
        }
        const value = metricValue(row, metric);
        const heat = peak > 0 ? value / peak : 0;
        const cellNode = el("div", {
          class: "cell",
          "data-cell": cellKey(row),
          "data-value": String(value),
          title: `cell ${cellKey(row)}: count ${row.count} of ${row.total}, rf ${row.relative_frequency}`,
          text: String(value),
        });
        cellNode.style.background = `rgba(32, 110, 60, ${0.15 + 0.85 * heat})`;
        cellNode.addEventListener("click", () => selectCell(cellKey(row)));
        grid.append(cellNode);
      }
    }
  }

  function redrawSeries(): void {
    clear(series);
    series.append(el("h4", { text: `cell ${cell} by month` }));
    const list = el("div", { class: "bars" });
    const visible = rows.filter((r) => cellKey(r) === cell);
    const byMonth = new Map(visible.map((r) => [monthKey(r), r]));
    const peak = Math.max(...visible.map((r) => metricValue(r, metric)), 0);
    for (const key of months) {
      const row = byMonth.get(key);
      const value = row ? metricValue(row, metric) : null;
      const bar = el(
        "div",
        { class: "bar-row", "data-month": key },
        el("span", { class: "bar-label", text: key }),
      );
      const fill = el("span", { class: "bar-fill" });
      if (value !== null && peak > 0) {
        fill.style.width = `${(100 * value) / peak}%`;
      }
      bar.append(
        fill,
        el("span", { class: "bar-value", text: value === null ? "-" : String(value) }),
      );
      list.append(bar);
    }
    series.append(list);
  }

  function setMetric(next: DemographyMetric): void {
    metric = next;
    countButton.classList.toggle("active", metric === "count");
    freqButton.classList.toggle("active", metric === "relative_frequency");
    redrawGrid();
    redrawSeries();
  }

  function selectMonth(key: string): void {
    month = key;
    redrawGrid();
  }

  function selectCell(key: string): void {
    cell = key;
    redrawSeries();
  }

  redrawGrid();
  redrawSeries();
  return { element, setMetric, selectMonth, selectCell };
}
