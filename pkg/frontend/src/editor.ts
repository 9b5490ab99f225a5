/**
 * Per-card editing state between a query response and a correction payload.
 *
 * Bars start at the model's own attribution and only features the expert
 * actually touches make it into the payload; an untouched card submits as a
 * bare label confirmation. Classification sessions only ever hold bar values
 * in {-1, 0, 1}. Bar edits and irrelevance marks are mutually exclusive
 * because a correction carries either a value map or an irrelevance set,
 * never both.
 */

import type { QueryCard, Task } from "./api.js";
import { type CorrectionPayload } from "./payload.js";

export interface BarState {
  value: number;
  initial: number;
  touched: boolean;
  available: boolean;
  irrelevant: boolean;
}

export interface CardEditor {
  sampleId: number;
  task: Task;
  features: number[];
  prediction: number;
  label: number;
  bars: BarState[];
}

export type UnitValue = -1 | 0 | 1;

/** Nearest of {-1, 0, 1}, halfway points rounding away from zero. */
export function snapUnit(v: number): UnitValue {
  if (v >= 0.5) return 1;
  if (v <= -0.5) return -1;
  return 0;
}

export function newEditor(card: QueryCard, task: Task): CardEditor {
  return {
    sampleId: card.sample_id,
    task,
    features: [...card.features],
    prediction: card.prediction,
    label: card.recorded_label,
    bars: card.attribution.values.map((value, i) => ({
      value,
      initial: value,
      touched: false,
      available: card.attribution.available[i],
      irrelevant: false,
    })),
  };
}

export function hasEdits(ed: CardEditor): boolean {
  return ed.bars.some((b) => b.touched);
}

export function hasIrrelevance(ed: CardEditor): boolean {
  return ed.bars.some((b) => b.irrelevant);
}

export function canEditBar(ed: CardEditor, index: number): boolean {
  const bar = ed.bars[index];
  return bar.available && !bar.irrelevant && !hasIrrelevance(ed);
}

export function canToggleIrrelevant(ed: CardEditor, index: number): boolean {
  return ed.bars[index].available && !hasEdits(ed);
}

/**
 * Set bar `index` to `raw`. Classification values snap to {-1, 0, 1}.
 * Ignored while the bar is locked, unavailable, or the card is in
 * irrelevance mode.
 */
export function setBar(ed: CardEditor, index: number, raw: number): CardEditor {
  if (!canEditBar(ed, index)) return ed;
  const value = ed.task === "classification" ? snapUnit(raw) : raw;
  const bars = ed.bars.map((b, i) => (i === index ? { ...b, value, touched: true } : b));
  return { ...ed, bars };
}

/**
 * Mark feature `index` irrelevant: the bar drops to zero and locks.
 * Toggling back restores the model's value. Ignored while any bar holds a
 * manual edit.
 */
export function toggleIrrelevant(ed: CardEditor, index: number): CardEditor {
  if (!canToggleIrrelevant(ed, index)) return ed;
  const bars = ed.bars.map((b, i) => {
    if (i !== index) return b;
    const irrelevant = !b.irrelevant;
    return { ...b, irrelevant, value: irrelevant ? 0 : b.initial };
  });
  return { ...ed, bars };
}

export function setLabel(ed: CardEditor, label: number): CardEditor {
  const value = ed.task === "classification" ? (label >= 0.5 ? 1 : 0) : label;
  return { ...ed, label: value };
}

/** The correction this card would submit right now. */
export function correctionOf(ed: CardEditor): CorrectionPayload {
  if (hasIrrelevance(ed)) {
    const irrelevant = ed.bars.flatMap((b, i) => (b.irrelevant ? [i] : []));
    return { sampleId: ed.sampleId, label: ed.label, irrelevant };
  }
  if (hasEdits(ed)) {
    const attributions = new Map<number, number>();
    ed.bars.forEach((b, i) => {
      if (b.touched && b.available) attributions.set(i, b.value);
    });
    return { sampleId: ed.sampleId, label: ed.label, attributions };
  }
  return { sampleId: ed.sampleId, label: ed.label };
}

export function skipPayload(sampleId: number): CorrectionPayload {
  return { sampleId, skip: true };
}
