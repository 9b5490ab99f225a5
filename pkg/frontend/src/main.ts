import { createClient } from "./api.js";
import { drawChart, metricLabel } from "./chart.js";
import { SessionController } from "./session.js";
import { renderSession } from "./view.js";

const $ = <T extends HTMLElement>(sel: string) => document.querySelector(sel) as T;

const root = $("#app");
const baseInput = $<HTMLInputElement>("#base-url");
const strategyInput = $<HTMLInputElement>("#strategy");
const configInput = $<HTMLInputElement>("#config-path");
const startButton = $<HTMLButtonElement>("#start");

baseInput.value = localStorage.getItem("attrloop:base-url") ?? "http://127.0.0.1:8731";

let ctl: SessionController | null = null;

function render(): void {
  if (ctl === null) return;
  renderSession(root, ctl);
  const canvas = document.querySelector<HTMLCanvasElement>("#metric-chart");
  if (canvas !== null && ctl.session !== null) {
    drawChart(canvas, ctl.series, metricLabel(ctl.session.task));
  }
}

async function guarded(action: () => Promise<void>): Promise<void> {
  if (ctl === null) return;
  try {
    await action();
  } catch {
    // controller state carries the error; render shows it
  }
  render();
}

startButton.addEventListener("click", () => {
  const base = baseInput.value.trim();
  localStorage.setItem("attrloop:base-url", base);
  ctl = new SessionController(createClient(base), localStorage);
  void guarded(async () => {
    const config = configInput.value.trim();
    await ctl!.start(strategyInput.value.trim(), config === "" ? undefined : config);
    await ctl!.refreshQuery();
  });
});

root.addEventListener("click", (ev) => {
  const target = (ev.target as HTMLElement).closest<HTMLElement>("[data-action]");
  if (target === null || ctl === null) return;
  const sample = Number(target.dataset.sample);
  switch (target.dataset.action) {
    case "submit":
      void guarded(() => ctl!.submit(sample));
      break;
    case "skip":
      void guarded(() => ctl!.skip(sample));
      break;
    case "irrelevant":
      ctl.markIrrelevant(sample, Number(target.dataset.index));
      render();
      break;
    case "retrain":
      void guarded(async () => {
        await ctl!.retrain();
        await ctl!.refreshMetrics();
        if (!ctl!.complete) await ctl!.refreshQuery();
      });
      break;
    case "retry":
      void guarded(() => ctl!.refreshQuery());
      break;
  }
});

root.addEventListener("change", (ev) => {
  const el = ev.target as HTMLElement;
  if (ctl === null) return;
  if (el.matches("[data-bar-input]")) {
    const input = el as HTMLInputElement;
    ctl.editBar(Number(input.dataset.sample), Number(input.dataset.index), Number(input.value));
    render();
  } else if (el.matches("[data-label]")) {
    const input = el as HTMLInputElement | HTMLSelectElement;
    ctl.editLabel(Number(input.dataset.sample), Number(input.value));
    render();
  }
});

// drag on a bar track maps pointer x to a signed value around the midline
root.addEventListener("pointerdown", (ev) => {
  const track = (ev.target as HTMLElement).closest<HTMLElement>("[data-bar].editable");
  if (track === null || ctl === null) return;
  const sample = Number(track.dataset.sample);
  const index = Number(track.dataset.index);
  const rect = track.getBoundingClientRect();
  const apply = (clientX: number) => {
    const rel = (clientX - rect.left) / rect.width;
    ctl!.editBar(sample, index, (rel - 0.5) * 2);
    render();
  };
  apply(ev.clientX);
  const move = (e: PointerEvent) => apply(e.clientX);
  const up = () => {
    window.removeEventListener("pointermove", move);
    window.removeEventListener("pointerup", up);
  };
  window.addEventListener("pointermove", move);
  window.addEventListener("pointerup", up);
});

root.innerHTML = `<p class="muted">No session. Pick a strategy and press start.</p>`;
