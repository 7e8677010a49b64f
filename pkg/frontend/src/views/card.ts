// Observation card: thumbnail, machine identification with rank badge,
// consensus status chip, location/time. Every figure is displayed exactly as
// delivered by the API.

import type { ApiClient } from "../api";
import { el, formatTimestamp } from "../dom";
import type { TaxonomyIndex } from "../taxonomy";
import type { ConsensusResult, Observation } from "../types";

export function machineSummary(observation: Observation, taxonomy: TaxonomyIndex): string {
  const machine = observation.machine_result;
  if (!machine) {
    return "not classified";
  }
  if (machine.chosen === "ROOT") {
    return `unidentified insect, confidence ${machine.confidence}`;
  }
  const name = taxonomy.displayName(machine.chosen);
  return `${name}, identified at ${machine.chosen_rank} level, confidence ${machine.confidence}`;
}

export function consensusChip(consensus: ConsensusResult): HTMLElement {
  return el("span", {
    class: `chip chip-${consensus.status}`,
    "data-status": consensus.status,
    text: consensus.status,
  });
}

export function renderTally(
  tally: Record<string, number>,
  taxonomy: TaxonomyIndex,
): HTMLElement {
  const table = el("table", { class: "tally" });
  for (const [taxonId, share] of Object.entries(tally)) {
    table.append(
      el(
        "tr",
        { "data-taxon": taxonId },
        el("td", { text: taxonomy.displayName(taxonId) }),
        el("td", { class: "tally-share", text: String(share) }),
      ),
    );
  }
  return table;
}

export function renderCard(
  observation: Observation,
  taxonomy: TaxonomyIndex,
  api: ApiClient,
): HTMLElement {
  const screening = observation.screening;
  const card = el(
    "div",
    { class: "card", "data-observation-id": observation.observation_id },
    el("img", {
      class: "thumb",
      src: api.imageUrl(observation.image_ref),
      alt: observation.observation_id,
    }),
    el(
      "div",
      { class: "card-body" },
      el("div", { class: "card-title", text: observation.observation_id }),
      el("div", { class: "machine", text: machineSummary(observation, taxonomy) }),
      el(
        "div",
        { class: "card-status" },
        consensusChip(observation.consensus),
        screening.status !== "ACCEPTED"
          ? el("span", { class: `chip chip-flag`, text: screening.status })
          : null,
      ),
      el("div", {
        class: "where",
        text: `${observation.latitude}, ${observation.longitude} - ${formatTimestamp(observation.captured_at)}`,
      }),
    ),
  );
  if (screening.status === "FLAGGED_DUPLICATE" && screening.matched_observation_id) {
    card.append(
      el(
        "div",
        { class: "dup-notice" },
        "quarantined: duplicate of ",
        el("a", {
          href: `#observation/${screening.matched_observation_id}`,
          text: screening.matched_observation_id,
        }),
      ),
    );
  }
  return card;
}

// Re-render the status chip from a mutation response without refetching.
export function updateCardConsensus(card: HTMLElement, consensus: ConsensusResult): void {
  const status = card.querySelector(".card-status");
  if (!status) return;
  const old = status.querySelector(".chip[data-status]");
  if (old) old.replaceWith(consensusChip(consensus));
  else status.prepend(consensusChip(consensus));
}
