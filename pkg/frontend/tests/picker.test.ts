// The rank-by-rank picker drills down the recorded taxonomy and can commit
// at any depth, so coarse identifications stay possible.

import { describe, expect, it } from "vitest";

import { TaxonomyIndex } from "../src/taxonomy";
import type { TaxonomyTree } from "../src/types";
import { createTaxonomyPicker } from "../src/views/picker";

import taxonomyFixture from "./fixtures/taxonomy.json";

const taxonomy = new TaxonomyIndex(taxonomyFixture as TaxonomyTree);

function choose(select: HTMLSelectElement, value: string): void {
  select.value = value;
  select.dispatchEvent(new Event("change"));
}

function levels(element: HTMLElement): HTMLSelectElement[] {
  return [...element.querySelectorAll<HTMLSelectElement>("select.picker-level")];
}

describe("taxonomy picker", () => {
  it("starts with the orders and drills to species", () => {
    const picker = createTaxonomyPicker(taxonomy, () => undefined);
    const [orders] = levels(picker.element);
    const orderIds = [...orders!.options].map((o) => o.value).filter(Boolean);
    expect(orderIds).toEqual(taxonomy.childrenOf("ROOT"));

    choose(orders!, "o1");
    const families = levels(picker.element)[1]!;
    expect([...families.options].map((o) => o.value).filter(Boolean)).toEqual(
      taxonomy.childrenOf("o1"),
    );

    choose(families, "f1");
    const genera = levels(picker.element)[2]!;
    choose(genera, "g1");
    const species = levels(picker.element)[3]!;
    expect([...species.options].map((o) => o.value).filter(Boolean)).toEqual(
      taxonomy.childrenOf("g1"),
    );
    choose(species, "s1");
    expect(picker.current()).toBe("s1");
  });

  it("can stop at a coarse rank", () => {
    let picked: string | null = null;
    const picker = createTaxonomyPicker(taxonomy, (taxonId) => {
      picked = taxonId;
    });
    const [orders] = levels(picker.element);
    choose(orders!, "o1");
    choose(levels(picker.element)[1]!, "f1");
    choose(levels(picker.element)[2]!, "g1");
    (picker.element.querySelector("button.pick-confirm") as HTMLButtonElement).click();
    expect(picked).toBe("g1");
  });

  it("resets deeper levels when an upper level changes", () => {
    const picker = createTaxonomyPicker(taxonomy, () => undefined);
    const [orders] = levels(picker.element);
    choose(orders!, "o1");
    choose(levels(picker.element)[1]!, "f1");
    choose(levels(picker.element)[2]!, "g1");
    expect(levels(picker.element).length).toBe(4);
    choose(levels(picker.element)[0]!, "o2");
    expect(levels(picker.element).length).toBe(2);
    expect(picker.current()).toBe("o2");
  });

  it("disables the confirm button until something is chosen", () => {
    const picker = createTaxonomyPicker(taxonomy, () => undefined);
    const button = picker.element.querySelector("button.pick-confirm") as HTMLButtonElement;
    expect(button.disabled).toBe(true);
    choose(levels(picker.element)[0]!, "o1");
    expect(button.disabled).toBe(false);
  });
});
