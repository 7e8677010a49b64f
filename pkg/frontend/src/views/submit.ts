// Submission form. One idempotency key per logical submission: a retry after
// a network failure reuses the key, so the server never records it twice.

import { ApiClient, ApiError, newIdempotencyKey } from "../api";
import { el } from "../dom";
import type { TaxonomyIndex } from "../taxonomy";
import { renderCard } from "./card";

export function renderSubmitForm(
  api: ApiClient,
  taxonomy: TaxonomyIndex,
  keyFactory: () => string = newIdempotencyKey,
): HTMLElement {
  const fileInput = el("input", { type: "file", accept: "image/*", name: "image" });
  const latInput = el("input", { type: "number", step: "any", name: "latitude", placeholder: "latitude" });
  const lonInput = el("input", { type: "number", step: "any", name: "longitude", placeholder: "longitude" });
  const whenInput = el("input", { type: "datetime-local", name: "captured_at" });
  const submitButton = el("button", { type: "submit", text: "submit observation" });
  const retryButton = el("button", { type: "button", class: "retry", text: "retry" });
  retryButton.hidden = true;
  const status = el("div", { class: "submit-status" });
  const result = el("div", { class: "submit-result" });

  const form = el(
    "form",
    { class: "submit-form" },
    el("label", {}, "photo ", fileInput),
    el("label", {}, "latitude ", latInput),
    el("label", {}, "longitude ", lonInput),
    el("label", {}, "captured ", whenInput),
    submitButton,
    retryButton,
    status,
    result,
  );

  // The key survives retries of the same attempt and renews after success.
  let attemptKey = keyFactory();

  async function send(): Promise<void> {
    const file = fileInput.files?.[0];
    if (!file) {
      status.textContent = "choose a photo first";
      return;
    }
    const capturedAt = whenInput.value
      ? Math.floor(new Date(whenInput.value + "Z").getTime() / 1000)
      : Math.floor(Date.now() / 1000);
    status.textContent = "uploading...";
    retryButton.hidden = true;
    try {
      const record = await api.submitObservation(
        file,
        file.name,
        {
          latitude: Number(latInput.value),
          longitude: Number(lonInput.value),
          captured_at: capturedAt,
        },
        attemptKey,
      );
      result.replaceChildren(renderCard(record, taxonomy, api));
      if (record.screening.status === "FLAGGED_DUPLICATE") {
        status.textContent = "this photo matches an existing observation and was quarantined";
      } else if (record.screening.status === "FLAGGED_NO_INSECT") {
        status.textContent = "no insect was detected; the photo is held for review";
      } else if (record.machine_result) {
        status.textContent = `identified at ${record.machine_result.chosen_rank} level, confidence ${record.machine_result.confidence}`;
      } else {
        status.textContent = "accepted; classification pending";
      }
      attemptKey = keyFactory();
    } catch (error) {
      if (error instanceof ApiError) {
        status.textContent = `${error.code}: ${error.message}`;
        attemptKey = keyFactory(); // rejected by the server: a new attempt is a new action
      } else {
        status.textContent = "network failure - the retry resends the same request";
        retryButton.hidden = false; // keep attemptKey: retry must reuse it
      }
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void send();
  });
  retryButton.addEventListener("click", () => void send());
  return form;
}
