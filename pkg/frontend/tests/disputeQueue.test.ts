// Contract: the dispute queue renders every DISPUTED observation delivered
// by the API, with tallies shown exactly as delivered.

import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api";
import { TaxonomyIndex } from "../src/taxonomy";
import type { CurrentUser, Observation, Page, TaxonomyTree } from "../src/types";
import { renderDisputeQueue } from "../src/views/disputes";

import disputedFixture from "./fixtures/disputed.json";
import meExpert from "./fixtures/me_expert.json";
import meRegular from "./fixtures/me_regular.json";
import taxonomyFixture from "./fixtures/taxonomy.json";

const taxonomy = new TaxonomyIndex(taxonomyFixture as unknown as TaxonomyTree);
const page = disputedFixture as unknown as Page<Observation>;
const api = new ApiClient("");

beforeEach(() => {
  vi.restoreAllMocks();
});

describe("dispute queue", () => {
  it("renders one item per disputed observation", () => {
    const queue = renderDisputeQueue(page.items, taxonomy, api, meRegular as CurrentUser);
    const cards = queue.querySelectorAll(".dispute-item");
    expect(cards.length).toBe(page.items.length);
    expect(page.items.length).toBeGreaterThan(0);
    for (const item of page.items) {
      expect(
        queue.querySelector(`[data-observation-id="${item.observation_id}"]`),
      ).not.toBeNull();
    }
  });

  it("shows the DISPUTED chip on every item", () => {
    const queue = renderDisputeQueue(page.items, taxonomy, api, meRegular as CurrentUser);
    const chips = queue.querySelectorAll(".chip[data-status]");
    expect(chips.length).toBe(page.items.length);
    for (const chip of chips) {
      expect(chip.getAttribute("data-status")).toBe("DISPUTED");
    }
  });

  it("renders tally shares verbatim from the API payload", () => {
    const queue = renderDisputeQueue(page.items, taxonomy, api, meRegular as CurrentUser);
    const items = queue.querySelectorAll(".dispute-item");
    page.items.forEach((observation, i) => {
      const item = items[i]!;
      const shares = Object.values(observation.tally);
      const sum = shares.reduce((a, b) => a + b, 0);
      expect(sum).toBeLessThanOrEqual(1 + 1e-9); // as delivered by the API
      for (const [taxonId, share] of Object.entries(observation.tally)) {
        const row = item.querySelector(`.tally tr[data-taxon="${taxonId}"]`);
        expect(row).not.toBeNull();
        expect(row!.querySelector(".tally-share")!.textContent).toBe(String(share));
      }
    });
  });

  it("offers resolve only to experts", () => {
    const expertQueue = renderDisputeQueue(page.items, taxonomy, api, meExpert as CurrentUser);
    const regularQueue = renderDisputeQueue(page.items, taxonomy, api, meRegular as CurrentUser);
    expect(expertQueue.querySelectorAll("button.resolve").length).toBe(page.items.length);
    expect(regularQueue.querySelectorAll("button.resolve").length).toBe(0);
  });

  it("renders an empty state without items", () => {
    const queue = renderDisputeQueue([], taxonomy, api, null);
    expect(queue.querySelector(".empty")).not.toBeNull();
  });
});
