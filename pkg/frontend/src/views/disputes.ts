// The expert work queue: every DISPUTED observation with its vote tally, a
// taxonomy picker for voting, and a resolve action for experts.

import { ApiClient, ApiError, newIdempotencyKey } from "../api";
import { el } from "../dom";
import type { TaxonomyIndex } from "../taxonomy";
import type { CurrentUser, Observation } from "../types";
import { renderCard, renderTally, updateCardConsensus } from "./card";
import { createTaxonomyPicker } from "./picker";

export function renderDisputeItem(
  observation: Observation,
  taxonomy: TaxonomyIndex,
  api: ApiClient,
  user: CurrentUser | null,
): HTMLElement {
  const card = renderCard(observation, taxonomy, api);
  const item = el("div", { class: "dispute-item" }, card);
  item.append(renderTally(observation.tally, taxonomy));

  const picker = createTaxonomyPicker(taxonomy, () => undefined);
  const feedback = el("div", { class: "feedback" });

  const voteButton = el("button", { type: "button", class: "vote", text: "vote" });
  voteButton.addEventListener("click", async () => {
    const taxon = picker.current();
    if (!taxon) return;
    try {
      const result = await api.castVote(
        observation.observation_id, taxon, newIdempotencyKey(),
      );
      updateCardConsensus(card, result);
      feedback.textContent = `vote recorded (${result.status})`;
    } catch (error) {
      feedback.textContent = describe(error);
    }
  });

  const controls = el("div", { class: "dispute-controls" }, picker.element, voteButton);

  if (user?.is_expert) {
    const resolveButton = el("button", {
      type: "button",
      class: "resolve",
      text: "resolve as expert",
    });
    resolveButton.addEventListener("click", async () => {
      const taxon = picker.current();
      if (!taxon) return;
      try {
        const result = await api.resolve(
          observation.observation_id, taxon, newIdempotencyKey(),
        );
        updateCardConsensus(card, result);
        feedback.textContent = `resolved to ${taxonomy.displayName(result.label ?? "")}`;
      } catch (error) {
        feedback.textContent = describe(error);
      }
    });
    controls.append(resolveButton);
  }

  item.append(controls, feedback);
  return item;
}

export function renderDisputeQueue(
  observations: Observation[],
  taxonomy: TaxonomyIndex,
  api: ApiClient,
  user: CurrentUser | null,
): HTMLElement {
  const queue = el("div", { class: "dispute-queue" });
  if (observations.length === 0) {
    queue.append(el("p", { class: "empty", text: "no disputed observations" }));
    return queue;
  }
  for (const observation of observations) {
    queue.append(renderDisputeItem(observation, taxonomy, api, user));
  }
  return queue;
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return String(error);
}
