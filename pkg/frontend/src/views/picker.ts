// Rank-by-rank taxonomy picker: order -> family -> genus -> species, with
// "use this taxon" at any depth so coarse identifications are first-class.

import { el, clear } from "../dom";
import { RANK_ORDER, ROOT_ID, TaxonomyIndex } from "../taxonomy";

export interface TaxonomyPicker {
  element: HTMLElement;
  current(): string | null;
  reset(): void;
}

export function createTaxonomyPicker(
  taxonomy: TaxonomyIndex,
  onPick: (taxonId: string) => void,
): TaxonomyPicker {
  const selects = el("div", { class: "picker-selects" });
  const element = el("div", { class: "picker" }, selects);
  let selection: string | null = null;

  const pickButton = el("button", { type: "button", class: "pick-confirm", text: "use this taxon" });
  pickButton.addEventListener("click", () => {
    if (selection) onPick(selection);
  });
  pickButton.disabled = true;
  element.append(pickButton);

  function addLevel(parentId: string, depth: number): void {
    if (depth >= RANK_ORDER.length) return;
    const options = taxonomy.childrenOf(parentId);
    if (options.length === 0) return;
    const select = el("select", { class: "picker-level", "data-rank": RANK_ORDER[depth]! });
    select.append(el("option", { value: "", text: `- ${RANK_ORDER[depth]} -` }));
    for (const taxonId of options) {
      select.append(el("option", { value: taxonId, text: taxonomy.displayName(taxonId) }));
    }
    select.addEventListener("change", () => {
      // dropping a choice at this level discards anything deeper
      while (selects.lastChild && selects.lastChild !== select) {
        selects.removeChild(selects.lastChild);
      }
      selection = select.value || null;
      pickButton.disabled = selection === null;
      if (select.value) addLevel(select.value, depth + 1);
    });
    selects.append(select);
  }

  function reset(): void {
    clear(selects);
    selection = null;
    pickButton.disabled = true;
    addLevel(ROOT_ID, 0);
  }

  reset();
  return { element, current: () => selection, reset };
}
