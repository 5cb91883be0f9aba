// Browser shell: wires the pure view modules onto the DOM. All state lives
// in the engine; this file only routes clicks to API calls and re-renders.

import { Api } from "./api.js";
import {
  martStarView,
  renderSvg,
  sourceView,
  warehouseView,
  ViewOptions,
} from "./graph.js";
import { chainText } from "./hierarchy.js";
import {
  clickProjection,
  displayFingerprint,
  lassoEnvironment,
  loadStudio,
  StudioState,
} from "./studio.js";

const api = new Api(location.origin.includes("8080")
  ? "http://127.0.0.1:8642"
  : location.origin);

let state: StudioState | null = null;
let seed = Number(localStorage.getItem("layout-seed") ?? "42");
localStorage.setItem("layout-seed", String(seed));

const options = (): ViewOptions => ({
  level: (document.querySelector<HTMLInputElement>("#with-attrs")?.checked
    ? "with-attributes"
    : "names-only"),
  hideInheritance: document.querySelector<HTMLInputElement>("#mask-inh")?.checked,
  hideComposition: document.querySelector<HTMLInputElement>("#mask-comp")?.checked,
  seed,
});

function banner(text: string, conflict = false): void {
  const el = document.querySelector("#banner")!;
  el.textContent = text;
  el.className = conflict ? "banner conflict" : "banner error";
  (el as HTMLElement).style.display = text ? "block" : "none";
}

async function render(): Promise<void> {
  if (!state) state = await loadStudio(api);
  const sourcePane = document.querySelector("#source-graph")!;
  sourcePane.innerHTML = renderSvg(sourceView(state.source, options()));
  const warehousePane = document.querySelector("#warehouse-graph")!;
  warehousePane.innerHTML = renderSvg(warehouseView(state.warehouse, state.marts, options()));
  document.querySelector("#fingerprint")!.textContent = displayFingerprint(state);
  const chains = state.marts.flatMap((m) =>
    m.dimensions.map((d) => `${m.name}/${d.name}: ${chainText(d.hierarchy)}`));
  document.querySelector("#hierarchies")!.textContent = chains.join("\n");
  const martPane = document.querySelector("#mart-graph")!;
  martPane.innerHTML = state.marts
    .map((m) => renderSvg(martStarView(m, seed)))
    .join("\n");

  sourcePane.querySelectorAll("[data-class]").forEach((node) => {
    node.addEventListener("click", async () => {
      const result = await clickProjection(api, state!, node.getAttribute("data-class")!);
      if (result.diagnostic) {
        banner(`${result.diagnostic.title}: ${result.diagnostic.message}`, result.conflict);
        if (result.conflict) state = await loadStudio(api);
      } else {
        state = result.state;
        banner(result.idempotent ? "already projected" : "");
      }
      void render();
    });
  });
}

document.querySelector("#lasso-create")?.addEventListener("click", async () => {
  const name = document.querySelector<HTMLInputElement>("#env-name")!.value;
  const classes = [...document.querySelectorAll("#warehouse-graph .selected[data-class]")]
    .map((n) => n.getAttribute("data-class")!);
  const links = [...document.querySelectorAll("#warehouse-graph .selected[data-link]")]
    .map((n) => n.getAttribute("data-link")!);
  const result = await lassoEnvironment(api, state!, name, classes, links);
  if (result.diagnostic) {
    banner(`${result.diagnostic.title}: ${result.diagnostic.message}`);
    if (result.diagnostic.target) {
      document.querySelectorAll(`[data-class="${result.diagnostic.target}"]`)
        .forEach((n) => n.classList.add("violation"));
    }
  } else {
    state = result.state;
  }
  void render();
});

document.querySelectorAll("#with-attrs, #mask-inh, #mask-comp").forEach((el) =>
  el.addEventListener("change", () => void render()));

void render();

// Refresh progress from the server-sent event stream.
(async () => {
  try {
    for await (const event of api.events()) {
      const el = document.querySelector("#progress");
      if (el) {
        el.textContent = event.event === "run-complete"
          ? `run ${event.run} complete`
          : `run ${event.run}: ${event.class} refreshed`;
      }
      if (event.event === "run-complete") {
        state = await loadStudio(api);
        void render();
      }
    }
  } catch {
    // stream closes when the service stops; the banner covers real errors
  }
})();
