/**
 * Template-string rendering of the session state. All interactive elements
 * carry data-* attributes; main.ts wires them through event delegation.
 */

import type { SessionController, CardView } from "./session.js";
import { canEditBar, canToggleIrrelevant, hasIrrelevance } from "./editor.js";
import { metricLabel } from "./chart.js";

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

function fmt(v: number): string {
  if (Number.isInteger(v)) return String(v);
  return v.toPrecision(4).replace(/\.?0+($|e)/, "$1");
}

function barScale(values: number[]): number {
  return Math.max(1, ...values.map((v) => Math.abs(v) * 1.25));
}

function barRow(view: CardView, index: number, featureName: string): string {
  const ed = view.editor;
  const bar = ed.bars[index];
  const scale = barScale(ed.bars.map((b) => b.value));
  const half = 50 * (Math.abs(bar.value) / scale);
  const side = bar.value < 0 ? `right:50%;width:${half}%` : `left:50%;width:${half}%`;
  const editable = view.status === "pending" && canEditBar(ed, index);
  const toggleable = view.status === "pending" && canToggleIrrelevant(ed, index);
  const cls = [
    "bar-fill",
    bar.value < 0 ? "neg" : "pos",
    bar.touched ? "touched" : "",
    bar.irrelevant ? "off" : "",
  ].join(" ");
  return `
    <div class="feature-row ${bar.available ? "" : "unavailable"}">
      <span class="feature-name" title="feature value">${esc(featureName)} = ${fmt(ed.features[index])}</span>
      <div class="bar-track ${editable ? "editable" : ""}" data-bar data-sample="${ed.sampleId}" data-index="${index}">
        <div class="bar-zero"></div>
        <div class="${cls}" style="${side}"></div>
      </div>
      <input class="bar-value" type="number" step="${ed.task === "classification" ? 1 : "any"}"
        value="${fmt(bar.value)}" ${editable ? "" : "disabled"}
        data-bar-input data-sample="${ed.sampleId}" data-index="${index}">
      <button class="chip ${bar.irrelevant ? "active" : ""}" ${toggleable || bar.irrelevant ? "" : "disabled"}
        title="mark this feature irrelevant"
        data-action="irrelevant" data-sample="${ed.sampleId}" data-index="${index}">&empty;</button>
    </div>`;
}

function labelEditor(view: CardView): string {
  const ed = view.editor;
  const disabled = view.status === "pending" ? "" : "disabled";
  if (ed.task === "classification") {
    return `
      <label>label
        <select data-label data-sample="${ed.sampleId}" ${disabled}>
          <option value="0" ${ed.label === 0 ? "selected" : ""}>0</option>
          <option value="1" ${ed.label === 1 ? "selected" : ""}>1</option>
        </select>
      </label>`;
  }
  return `
    <label>label
      <input type="number" step="any" value="${fmt(ed.label)}"
        data-label data-sample="${ed.sampleId}" ${disabled}>
    </label>`;
}

function cardHtml(view: CardView, featureNames: string[]): string {
  const ed = view.editor;
  const status =
    view.status === "pending" ? "" : `<span class="status ${view.status}">${view.status}</span>`;
  const mode = hasIrrelevance(ed) ? "irrelevance" : ed.bars.some((b) => b.touched) ? "edited" : "as-is";
  return `
    <article class="card ${view.status}" data-card="${ed.sampleId}">
      <header>
        <span>sample ${ed.sampleId}</span>
        <span class="muted">predicted ${fmt(ed.prediction)} · recorded ${fmt(view.card.recorded_label)}</span>
        ${status}
      </header>
      <div class="bars">
        ${ed.bars.map((_, i) => barRow(view, i, featureNames[i] ?? `x${i}`)).join("")}
      </div>
      <footer>
        ${labelEditor(view)}
        <span class="muted">sends: ${mode}</span>
        <span class="spacer"></span>
        <button data-action="skip" data-sample="${ed.sampleId}"
          ${view.status === "pending" ? "" : "disabled"}>skip</button>
        <button class="primary" data-action="submit" data-sample="${ed.sampleId}"
          ${view.status === "pending" ? "" : "disabled"}>submit</button>
      </footer>
      ${view.error === null ? "" : `<p class="error">${esc(view.error)}</p>`}
    </article>`;
}

export function renderSession(root: HTMLElement, ctl: SessionController): void {
  const session = ctl.session;
  if (session === null) {
    root.innerHTML = `<p class="muted">No session. Pick a strategy and press start.</p>`;
    return;
  }
  const banner =
    ctl.banner === null
      ? ""
      : `<div class="banner">service unreachable: ${esc(ctl.banner)}
           <button data-action="retry">retry</button></div>`;
  const done = ctl.complete
    ? `<p class="done">Session complete after ${ctl.iteration} iterations.</p>`
    : "";
  root.innerHTML = `
    ${banner}
    <section class="session-head">
      <span class="badge">${esc(session.strategy)}</span>
      <span class="muted">${esc(session.task)} · iteration ${ctl.iteration} · ${metricLabel(session.task)}
        ${ctl.series.length > 0 ? fmt(ctl.series[ctl.series.length - 1].metric) : "–"}</span>
      <span class="spacer"></span>
      <button class="primary" data-action="retrain" ${ctl.canRetrain && !ctl.complete ? "" : "disabled"}>
        submit round &amp; retrain</button>
    </section>
    <section class="chart-box"><canvas id="metric-chart" width="860" height="220"></canvas></section>
    ${done}
    <section class="cards">
      ${ctl.cards.map((c) => cardHtml(c, session.feature_names)).join("")}
    </section>`;
}
