import { describe, expect, it } from "vitest";

import type { QueryCard, QueryResponse } from "../src/api.js";
import { clearDraft, loadEditor, saveDraft, type StorageLike } from "../src/drafts.js";
import { newEditor, setBar, setLabel, toggleIrrelevant } from "../src/editor.js";
import { loadTranscript } from "./mock.js";

const transcript = loadTranscript();
const firstQuery = JSON.parse(
  transcript.exchanges.filter((e) => e.method === "GET" && e.path.endsWith("/query"))[0].response,
) as QueryResponse;
const card: QueryCard = firstQuery.pending[2];

function memoryStore(): StorageLike & { size(): number } {
  const map = new Map<string, string>();
  return {
    getItem: (k) => map.get(k) ?? null,
    setItem: (k, v) => void map.set(k, v),
    removeItem: (k) => void map.delete(k),
    size: () => map.size,
  };
}

describe("draft storage", () => {
  it("keeps partial edits across a reload", () => {
    const store = memoryStore();
    let ed = newEditor(card, "classification");
    ed = setBar(ed, 1, 1);
    ed = setLabel(ed, 1);
    saveDraft(store, "s1", ed, card);

    const reloaded = loadEditor(store, "s1", card, "classification");
    expect(reloaded.bars[1].value).toBe(1);
    expect(reloaded.bars[1].touched).toBe(true);
    expect(reloaded.label).toBe(1);
  });

  it("keeps irrelevance marks across a reload", () => {
    const store = memoryStore();
    const ed = toggleIrrelevant(newEditor(card, "classification"), 3);
    saveDraft(store, "s1", ed, card);

    const reloaded = loadEditor(store, "s1", card, "classification");
    expect(reloaded.bars[3].irrelevant).toBe(true);
    expect(reloaded.bars[3].value).toBe(0);
  });

  it("stores nothing for a clean card and clears after submit", () => {
    const store = memoryStore();
    saveDraft(store, "s1", newEditor(card, "classification"), card);
    expect(store.size()).toBe(0);

    let ed = newEditor(card, "classification");
    ed = setBar(ed, 1, 1);
    saveDraft(store, "s1", ed, card);
    expect(store.size()).toBe(1);
    clearDraft(store, "s1", card.sample_id);
    expect(loadEditor(store, "s1", card, "classification").bars[1].touched).toBe(false);
  });

  it("ignores corrupt or mismatched drafts", () => {
    const store = memoryStore();
    store.setItem(`attrloop:draft:s1:${card.sample_id}`, "{not json");
    expect(loadEditor(store, "s1", card, "classification").bars[1].touched).toBe(false);

    store.setItem(
      `attrloop:draft:s1:${card.sample_id}`,
      JSON.stringify({ sampleId: card.sample_id, label: 1, bars: [] }),
    );
    expect(loadEditor(store, "s1", card, "classification").bars).toHaveLength(4);
  });

  it("scopes drafts by session", () => {
    const store = memoryStore();
    let ed = newEditor(card, "classification");
    ed = setBar(ed, 1, 1);
    saveDraft(store, "s1", ed, card);
    expect(loadEditor(store, "other", card, "classification").bars[1].touched).toBe(false);
  });
});
