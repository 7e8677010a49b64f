// Paged gallery with status/taxon filters driven by the list endpoint.

import type { ApiClient } from "../api";
import { el, clear } from "../dom";
import type { TaxonomyIndex } from "../taxonomy";
import { renderCard } from "./card";

const STATUS_OPTIONS = [
  "",
  "PENDING",
  "CONSENSUS",
  "DISPUTED",
  "EXPERT_RESOLVED",
  "ACCEPTED",
  "FLAGGED_DUPLICATE",
  "FLAGGED_NO_INSECT",
];

export function renderGallery(api: ApiClient, taxonomy: TaxonomyIndex): HTMLElement {
  const list = el("div", { class: "gallery-list" });
  const moreButton = el("button", { type: "button", text: "load more" });
  moreButton.hidden = true;
  const statusSelect = el("select", { class: "status-filter" });
  for (const value of STATUS_OPTIONS) {
    statusSelect.append(el("option", { value, text: value || "any status" }));
  }
  const errorBox = el("div", { class: "error" });

  let cursor: string | null = null;

  async function load(reset: boolean): Promise<void> {
    if (reset) {
      clear(list);
      cursor = null;
    }
    try {
      const page = await api.listObservations({
        status: statusSelect.value || undefined,
        cursor: cursor ?? undefined,
        limit: 24,
      });
      for (const observation of page.items) {
        list.append(renderCard(observation, taxonomy, api));
      }
      cursor = page.next_cursor;
      moreButton.hidden = cursor === null;
      errorBox.textContent = "";
    } catch (error) {
      errorBox.textContent = String(error);
    }
  }

  statusSelect.addEventListener("change", () => void load(true));
  moreButton.addEventListener("click", () => void load(false));
  void load(true);

  return el(
    "div",
    { class: "gallery" },
    el("div", { class: "gallery-controls" }, el("label", {}, "status ", statusSelect)),
    errorBox,
    list,
    moreButton,
  );
}
