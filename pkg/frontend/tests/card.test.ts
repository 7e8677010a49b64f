// Contract: card fields mirror the API payload; no client-side recomputation.

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { TaxonomyIndex } from "../src/taxonomy";
import type { Observation, TaxonomyTree } from "../src/types";
import { machineSummary, renderCard } from "../src/views/card";

import submitAccepted from "./fixtures/submit_accepted.json";
import submitDuplicate from "./fixtures/submit_duplicate.json";
import taxonomyFixture from "./fixtures/taxonomy.json";

const taxonomy = new TaxonomyIndex(taxonomyFixture as unknown as TaxonomyTree);
const api = new ApiClient("");

describe("observation card", () => {
  it("shows the machine identification with rank and raw confidence", () => {
    const observation = submitAccepted as unknown as Observation;
    const summary = machineSummary(observation, taxonomy);
    expect(summary).toContain(`identified at ${observation.machine_result!.chosen_rank} level`);
    expect(summary).toContain(`confidence ${observation.machine_result!.confidence}`);
    const card = renderCard(observation, taxonomy, api);
    expect(card.querySelector(".machine")!.textContent).toBe(summary);
  });

  it("links the thumbnail to the image endpoint", () => {
    const observation = submitAccepted as unknown as Observation;
    const card = renderCard(observation, taxonomy, api);
    expect(card.querySelector("img.thumb")!.getAttribute("src")).toBe(
      `/api/v1/images/${observation.image_ref}`,
    );
  });

  it("marks duplicates with a link to the matched observation", () => {
    const dup = submitDuplicate as unknown as Observation;
    expect(dup.screening.status).toBe("FLAGGED_DUPLICATE");
    const card = renderCard(dup, taxonomy, api);
    const notice = card.querySelector(".dup-notice");
    expect(notice).not.toBeNull();
    expect(notice!.querySelector("a")!.textContent).toBe(
      dup.screening.matched_observation_id,
    );
  });

  it("shows a flag chip for quarantined items", () => {
    const dup = submitDuplicate as unknown as Observation;
    const card = renderCard(dup, taxonomy, api);
    expect(card.querySelector(".chip-flag")!.textContent).toBe("FLAGGED_DUPLICATE");
  });
});
