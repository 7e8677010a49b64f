// Contract: a vote crossing quorum flips the status chip using only the
// mutation response, and every mutation carries an Idempotency-Key.

import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api";
import { TaxonomyIndex } from "../src/taxonomy";
import type { ConsensusResult, Observation, TaxonomyTree } from "../src/types";
import { renderCard, updateCardConsensus } from "../src/views/card";

import submitAccepted from "./fixtures/submit_accepted.json";
import taxonomyFixture from "./fixtures/taxonomy.json";
import voteBefore from "./fixtures/vote_before_quorum.json";
import voteCrossing from "./fixtures/vote_crossing_quorum.json";

const taxonomy = new TaxonomyIndex(taxonomyFixture as unknown as TaxonomyTree);
const api = new ApiClient("");

describe("vote flow", () => {
  it("crossing quorum flips the chip PENDING -> CONSENSUS", () => {
    const observation = submitAccepted as unknown as Observation;
    expect(observation.consensus.status).toBe("PENDING");
    const card = renderCard(observation, taxonomy, api);
    expect(card.querySelector(".chip[data-status]")!.getAttribute("data-status")).toBe(
      "PENDING",
    );

    updateCardConsensus(card, voteBefore as ConsensusResult);
    expect(card.querySelector(".chip[data-status]")!.getAttribute("data-status")).toBe(
      "PENDING",
    );

    updateCardConsensus(card, voteCrossing as ConsensusResult);
    const chip = card.querySelector(".chip[data-status]")!;
    expect(chip.getAttribute("data-status")).toBe("CONSENSUS");
    expect(chip.textContent).toBe("CONSENSUS");
  });

  it("the recorded quorum responses agree with their fixture fields", () => {
    const before = voteBefore as ConsensusResult;
    const crossing = voteCrossing as ConsensusResult;
    expect(before.status).toBe("PENDING");
    expect(crossing.status).toBe("CONSENSUS");
    expect(crossing.vote_count).toBe(3);
  });

  it("castVote sends an Idempotency-Key header", async () => {
    const seen: Array<Record<string, string>> = [];
    vi.stubGlobal(
      "fetch",
      vi.fn(async (_url: unknown, init?: RequestInit) => {
        seen.push((init?.headers ?? {}) as Record<string, string>);
        return new Response(JSON.stringify(voteCrossing), { status: 200 });
      }),
    );
    try {
      const client = new ApiClient("", "tok");
      await client.castVote("obs-00000001", "s1", "key-abc");
      await client.resolve("obs-00000001", "s1", "key-def");
      expect(seen[0]!["Idempotency-Key"]).toBe("key-abc");
      expect(seen[1]!["Idempotency-Key"]).toBe("key-def");
      expect(seen[0]!["Authorization"]).toBe("Bearer tok");
    } finally {
      vi.unstubAllGlobals();
    }
  });
});
