// App shell: token entry plus four tabs (gallery, submit, disputes,
// demography), all rendered from /api/v1 responses.

import "./style.css";

import { ApiClient } from "./api";
import { el, clear } from "./dom";
import { TaxonomyIndex } from "./taxonomy";
import type { CurrentUser } from "./types";
import { renderDemography } from "./views/demography";
import { renderDisputeQueue } from "./views/disputes";
import { renderGallery } from "./views/gallery";
import { createTaxonomyPicker } from "./views/picker";
import { renderSubmitForm } from "./views/submit";

const api = new ApiClient("", localStorage.getItem("entobase-token") ?? "");

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;

  let taxonomy: TaxonomyIndex;
  try {
    taxonomy = new TaxonomyIndex(await api.taxonomy());
  } catch (error) {
    root.append(el("p", { class: "error", text: `cannot reach the API: ${error}` }));
    return;
  }

  let user: CurrentUser | null = null;
  async function refreshUser(): Promise<void> {
    try {
      user = await api.me();
    } catch {
      user = null;
    }
  }
  await refreshUser();

  const tokenInput = el("input", {
    type: "password",
    placeholder: "access token",
    value: localStorage.getItem("entobase-token") ?? "",
  });
  const tokenApply = el("button", { type: "button", text: "sign in" });
  const whoami = el("span", { class: "whoami" });
  tokenApply.addEventListener("click", async () => {
    localStorage.setItem("entobase-token", tokenInput.value);
    api.setToken(tokenInput.value);
    await refreshUser();
    renderWho();
    show(active);
  });

  function renderWho(): void {
    whoami.textContent = user
      ? `${user.user_id}${user.is_expert ? " (expert)" : ""}`
      : "not signed in";
  }
  renderWho();

  const content = el("div", { class: "content" });
  const tabs: Record<string, () => Promise<HTMLElement> | HTMLElement> = {
    gallery: () => renderGallery(api, taxonomy),
    submit: () => renderSubmitForm(api, taxonomy),
    disputes: async () => {
      const page = await api.disputed();
      return renderDisputeQueue(page.items, taxonomy, api, user);
    },
    demography: async () => {
      const wrapper = el("div", {});
      const picker = createTaxonomyPicker(taxonomy, async (taxonId) => {
        const response = await api.demography(taxonId);
        const old = wrapper.querySelector(".demography");
        if (old) old.remove();
        wrapper.append(renderDemography(response.rows).element);
      });
      wrapper.append(el("p", { text: "pick a taxon to map its occurrences" }), picker.element);
      return wrapper;
    },
  };

  let active = "gallery";
  async function show(name: string): Promise<void> {
    active = name;
    clear(content);
    content.append(await tabs[name]!());
    for (const button of nav.querySelectorAll("button")) {
      button.classList.toggle("active", button.dataset.tab === name);
    }
  }

  const nav = el("nav", {});
  for (const name of Object.keys(tabs)) {
    const button = el("button", { type: "button", "data-tab": name, text: name });
    button.addEventListener("click", () => void show(name));
    nav.append(button);
  }

  root.append(
    el("header", {}, el("h1", { text: "entobase" }), nav,
      el("div", { class: "auth" }, tokenInput, tokenApply, whoami)),
    content,
  );
  await show("gallery");
}

void boot();
