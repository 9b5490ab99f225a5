/**
 * Unsubmitted card edits, persisted so a reload mid-session loses nothing.
 * Storage is injected: the page passes window.localStorage, tests a map.
 */

import type { CardEditor } from "./editor.js";
import { newEditor } from "./editor.js";
import type { QueryCard, Task } from "./api.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

interface Draft {
  sampleId: number;
  label: number;
  bars: { value: number; touched: boolean; irrelevant: boolean }[];
}

function key(sessionId: string, sampleId: number): string {
  return `attrloop:draft:${sessionId}:${sampleId}`;
}

function isDirty(ed: CardEditor, card: QueryCard): boolean {
  return (
    ed.label !== card.recorded_label ||
    ed.bars.some((b) => b.touched || b.irrelevant)
  );
}

export function saveDraft(store: StorageLike, sessionId: string, ed: CardEditor, card: QueryCard): void {
  if (!isDirty(ed, card)) {
    store.removeItem(key(sessionId, ed.sampleId));
    return;
  }
  const draft: Draft = {
    sampleId: ed.sampleId,
    label: ed.label,
    bars: ed.bars.map((b) => ({ value: b.value, touched: b.touched, irrelevant: b.irrelevant })),
  };
  store.setItem(key(sessionId, ed.sampleId), JSON.stringify(draft));
}

/**
 * Rebuild the editor for `card`, merging any stored draft onto a fresh
 * editor so availability always reflects the latest query response.
 */
export function loadEditor(store: StorageLike, sessionId: string, card: QueryCard, task: Task): CardEditor {
  const fresh = newEditor(card, task);
  const raw = store.getItem(key(sessionId, card.sample_id));
  if (raw === null) return fresh;
  let draft: Draft;
  try {
    draft = JSON.parse(raw) as Draft;
  } catch {
    return fresh;
  }
  if (draft.sampleId !== card.sample_id || draft.bars.length !== fresh.bars.length) return fresh;
  return {
    ...fresh,
    label: draft.label,
    bars: fresh.bars.map((b, i) => ({
      ...b,
      value: draft.bars[i].value,
      touched: draft.bars[i].touched,
      irrelevant: draft.bars[i].irrelevant && b.available,
    })),
  };
}

export function clearDraft(store: StorageLike, sessionId: string, sampleId: number): void {
  store.removeItem(key(sessionId, sampleId));
}
