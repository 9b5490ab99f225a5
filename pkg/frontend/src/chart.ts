/**
 * Metric history: a reducer the session controller feeds, plus a canvas
 * renderer. Every point is a server-reported metric; the UI never derives
 * one. A retrain appends exactly one point, and a stale or repeated retrain
 * response appends nothing.
 */

import type { MetricsResponse, RetrainResponse, SessionInfo, Task } from "./api.js";

export interface MetricPoint {
  iteration: number;
  metric: number;
}

export function initSeries(session: SessionInfo): MetricPoint[] {
  return [{ iteration: session.iteration, metric: session.metric }];
}

export function appendRetrain(series: readonly MetricPoint[], resp: RetrainResponse): MetricPoint[] {
  const last = series[series.length - 1];
  if (last !== undefined && resp.iteration <= last.iteration) return [...series];
  return [...series, { iteration: resp.iteration, metric: resp.metric }];
}

/** Rebuild the series from GET /metrics, the single source of truth. */
export function fromMetrics(resp: MetricsResponse): MetricPoint[] {
  return resp.metric.map((metric, iteration) => ({ iteration, metric }));
}

export function metricLabel(task: Task): string {
  return task === "classification" ? "accuracy" : "mse";
}

const PAD = { left: 44, right: 12, top: 10, bottom: 22 };

export function drawChart(canvas: HTMLCanvasElement, series: readonly MetricPoint[], label: string): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.font = "11px system-ui, sans-serif";

  if (series.length === 0) return;
  const xs = series.map((p) => p.iteration);
  const ys = series.map((p) => p.metric);
  const xmax = Math.max(1, ...xs);
  let ymin = Math.min(...ys);
  let ymax = Math.max(...ys);
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const plotW = w - PAD.left - PAD.right;
  const plotH = h - PAD.top - PAD.bottom;
  const px = (it: number) => PAD.left + (it / xmax) * plotW;
  const py = (v: number) => PAD.top + (1 - (v - ymin) / (ymax - ymin)) * plotH;

  ctx.strokeStyle = "#3c4450";
  ctx.fillStyle = "#9aa4b2";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(PAD.left, PAD.top);
  ctx.lineTo(PAD.left, h - PAD.bottom);
  ctx.lineTo(w - PAD.right, h - PAD.bottom);
  ctx.stroke();

  for (const v of [ymin, (ymin + ymax) / 2, ymax]) {
    const y = py(v);
    ctx.fillText(v.toPrecision(3), 4, y + 4);
    ctx.beginPath();
    ctx.strokeStyle = "#262c35";
    ctx.moveTo(PAD.left, y);
    ctx.lineTo(w - PAD.right, y);
    ctx.stroke();
  }
  ctx.fillText(`iteration (${label})`, PAD.left, h - 6);

  ctx.strokeStyle = "#58a6ff";
  ctx.lineWidth = 2;
  ctx.beginPath();
  series.forEach((p, i) => {
    const x = px(p.iteration);
    const y = py(p.metric);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();

  ctx.fillStyle = "#58a6ff";
  for (const p of series) {
    ctx.beginPath();
    ctx.arc(px(p.iteration), py(p.metric), 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}
