// Contract: a retry after a network failure reuses the same Idempotency-Key;
// a fresh submission after success gets a new one.

import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api";
import { TaxonomyIndex } from "../src/taxonomy";
import type { TaxonomyTree } from "../src/types";
import { renderSubmitForm } from "../src/views/submit";

import submitAccepted from "./fixtures/submit_accepted.json";
import taxonomyFixture from "./fixtures/taxonomy.json";

const taxonomy = new TaxonomyIndex(taxonomyFixture as TaxonomyTree);

function attachFile(form: HTMLElement): void {
  const input = form.querySelector('input[type="file"]') as HTMLInputElement;
  const file = new File([new Uint8Array([1, 2, 3])], "bug.png", { type: "image/png" });
  Object.defineProperty(input, "files", { value: [file], configurable: true });
}

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

describe("submit flow", () => {
  it("reuses the idempotency key on retry after a network failure", async () => {
    const keys: string[] = [];
    let calls = 0;
    vi.stubGlobal(
      "fetch",
      vi.fn(async (_url: unknown, init?: RequestInit) => {
        keys.push((init?.headers as Record<string, string>)["Idempotency-Key"]!);
        calls += 1;
        if (calls === 1) throw new TypeError("network down");
        return new Response(JSON.stringify(submitAccepted), { status: 201 });
      }),
    );
    try {
      let n = 0;
      const form = renderSubmitForm(new ApiClient("", "tok"), taxonomy, () => `key-${n++}`);
      attachFile(form);
      form.dispatchEvent(new Event("submit"));
      await flush();
      expect(form.querySelector(".submit-status")!.textContent).toContain("retry");
      const retry = form.querySelector("button.retry") as HTMLButtonElement;
      expect(retry.hidden).toBe(false);

      retry.click();
      await flush();
      expect(keys).toEqual(["key-0", "key-0"]); // same action, same key
      expect(form.querySelector(".card")).not.toBeNull();

      form.dispatchEvent(new Event("submit"));
      await flush();
      expect(keys[2]).toBe("key-1"); // new action, new key
    } finally {
      vi.unstubAllGlobals();
    }
  });

  it("surfaces API errors verbatim with their code", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () =>
        new Response(
          JSON.stringify({ code: "out_of_range_coordinates", message: "(91.0, 0.0)" }),
          { status: 400 },
        ),
      ),
    );
    try {
      const form = renderSubmitForm(new ApiClient("", "tok"), taxonomy, () => "key-x");
      attachFile(form);
      form.dispatchEvent(new Event("submit"));
      await flush();
      expect(form.querySelector(".submit-status")!.textContent).toBe(
        "out_of_range_coordinates: (91.0, 0.0)",
      );
    } finally {
      vi.unstubAllGlobals();
    }
  });

  it("announces quarantined duplicates", async () => {
    const dupFixture = await import("./fixtures/submit_duplicate.json");
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response(JSON.stringify(dupFixture.default), { status: 201 })),
    );
    try {
      const form = renderSubmitForm(new ApiClient("", "tok"), taxonomy, () => "key-y");
      attachFile(form);
      form.dispatchEvent(new Event("submit"));
      await flush();
      expect(form.querySelector(".submit-status")!.textContent).toContain("quarantined");
      expect(form.querySelector(".dup-notice a")).not.toBeNull();
    } finally {
      vi.unstubAllGlobals();
    }
  });
});
