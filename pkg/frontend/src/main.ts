/** Entry point: builds the control panel and wires it to the viewer. */

import { HttpApi, PARAM_ORDER, type ParamName } from "./api";
import { Viewer } from "./render";
import { SessionController, type SessionState } from "./state";

const LABELS: Record<ParamName, string> = {
  y_P1: "vessel curvature y [mm]",
  z_P1: "vessel curvature z [mm]",
  D_v: "vessel diameter [mm]",
  D_a: "aneurysm diameter [mm]",
  y_Ca: "aneurysm offset [mm]",
  eta: "deployment site η",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  parent?.appendChild(node);
  return node;
}

function main(): void {
  const app = document.getElementById("app")!;
  const panel = el("div", "panel", app);
  const stage = el("div", "stage", app);
  const canvas = el("canvas", "viewport", stage);
  const badge = el("div", "badge hidden", stage);
  badge.textContent = "DEPLOYMENT FAILURE PREDICTED";
  const toast = el("div", "toast hidden", stage);
  const viewer = new Viewer(canvas);

  const sliders = new Map<ParamName, { range: HTMLInputElement; num: HTMLInputElement }>();
  const scoreLine = el("div", "score", panel);

  const controller = new SessionController(new HttpApi(), (state) => {
    render(state);
  });

  function render(state: SessionState): void {
    badge.classList.toggle("hidden", !state.failureBadge);
    toast.classList.toggle("hidden", state.toast === null);
    if (state.toast !== null) toast.textContent = `request failed: ${state.toast}`;
    for (const [name, pair] of sliders) {
      if (document.activeElement !== pair.num) pair.num.value = state.mu[name].toFixed(3);
      pair.range.value = String(state.mu[name]);
      pair.num.classList.toggle("clamped", state.clampedHint === name);
    }
    if (state.prediction) {
      const p = state.prediction;
      scoreLine.textContent = `${p.classifier}: ${p.label} (score ${p.score.toFixed(3)})${
        state.inFlight ? " …" : ""
      }`;
    }
    viewer.update(state);
  }

  void controller.init().then(() => {
    const info = controller.state.info!;
    for (const name of PARAM_ORDER) {
      const [lo, hi] = info.ranges[name];
      const row = el("label", "row", panel);
      el("span", "name", row).textContent = LABELS[name];
      const range = el("input", "", row);
      range.type = "range";
      range.min = String(lo);
      range.max = String(hi);
      range.step = String((hi - lo) / 200);
      const num = el("input", "value", row);
      num.type = "number";
      num.step = "0.1";
      range.addEventListener("input", () => controller.setParam(name, Number(range.value)));
      num.addEventListener("change", () => {
        num.value = controller.setParam(name, Number(num.value)).toFixed(3);
      });
      sliders.set(name, { range, num });
    }

    const opts = el("div", "row options", panel);
    const uToggle = el("input", "", opts);
    uToggle.type = "checkbox";
    uToggle.id = "uncertainty";
    const uLabel = el("label", "", opts);
    uLabel.htmlFor = "uncertainty";
    uLabel.textContent = "uncertainty overlay";
    const count = el("input", "value", opts);
    count.type = "number";
    count.min = "0";
    count.max = "100";
    count.value = String(controller.state.options.samples);
    uToggle.addEventListener("change", () => controller.setUncertainty(uToggle.checked));
    count.addEventListener("change", () => controller.setSampleCount(Number(count.value)));

    render(controller.state);
  });
}

main();
