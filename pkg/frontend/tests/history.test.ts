import { describe, expect, it } from "vitest";

import {
  HistoryStore,
  type StorageLike,
  compareEntries,
  exportComparisonCsv,
  renderComparison,
} from "../src/history.js";
import { draftA, entry, responseA } from "./fixtures.js";

class MemoryStorage implements StorageLike {
  private data = new Map<string, string>();
  getItem(key: string) { return this.data.get(key) ?? null; }
  setItem(key: string, value: string) { this.data.set(key, value); }
  removeItem(key: string) { this.data.delete(key); }
}

describe("history store", () => {
  it("adds, lists newest-first, removes, clears", () => {
    const store = new HistoryStore(new MemoryStorage());
    let t = 1000;
    const now = () => t++;
    const first = store.add("first", draftA, responseA, now);
    const second = store.add("second", draftA, responseA, now);
    expect(store.list().map((e) => e.label)).toEqual(["second", "first"]);
    store.remove(second.id);
    expect(store.list().map((e) => e.id)).toEqual([first.id]);
    store.clear();
    expect(store.list()).toEqual([]);
  });

  it("entries are immutable once stored", () => {
    const store = new HistoryStore(new MemoryStorage());
    const stored = store.add("locked", draftA, responseA);
    expect(Object.isFrozen(stored)).toBe(true);
    expect(store.list().every((e) => Object.isFrozen(e))).toBe(true);
  });

  it("caps the history length", () => {
    const store = new HistoryStore(new MemoryStorage(), "k", 3);
    for (let i = 0; i < 5; i++) store.add(`e${i}`, draftA, responseA);
    expect(store.list()).toHaveLength(3);
    expect(store.list()[0]?.label).toBe("e4");
  });
});

describe("comparison", () => {
  const a = entry("a", "Denmark run", draftA, responseA);

  it("identical entries produce no diff cells", () => {
    const b = entry("b", "Denmark again", draftA, responseA);
    const rows = compareEntries([a, b]);
    expect(rows.some((r) => r.differs)).toBe(false);
    const html = renderComparison([a, b]);
    expect(html).not.toContain('class="diff"');
  });

  it("entries differing only in location flag exactly that feature row", () => {
    const b = entry("b", "Japan run",
                    { ...draftA, location: "Japan" }, responseA);
    const rows = compareEntries([a, b]);
    const differing = rows.filter((r) => r.differs).map((r) => r.field);
    expect(differing).toEqual(["location"]);
    const html = renderComparison([a, b]);
    expect(html).toContain('<tr class="diff"><td>location</td>');
  });

  it("different models highlight the model row", () => {
    const b = entry("b", "other model", draftA, {
      ...responseA, model_id: "mock:nearest:zzz999",
    });
    const rows = compareEntries([a, b]);
    expect(rows.find((r) => r.field === "model")?.differs).toBe(true);
  });

  it("prediction differences are flagged alongside features", () => {
    const b = entry("b", "flipped", draftA, {
      ...responseA,
      aggregate: { ...responseA.aggregate, majority_direction: "positive",
                   vote_share: 0.5 },
    });
    const differing = compareEntries([a, b]).filter((r) => r.differs)
      .map((r) => r.field);
    expect(differing).toContain("majority_direction");
    expect(differing).toContain("vote_share");
    expect(differing).not.toContain("location");
  });

  it("needs at least two entries", () => {
    expect(() => compareEntries([a])).toThrow(/two/);
  });
});

function parseCsv(text: string): string[][] {
  const rows: string[][] = [];
  let row: string[] = [];
  let cell = "";
  let quoted = false;
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (quoted) {
      if (ch === '"' && text[i + 1] === '"') { cell += '"'; i++; }
      else if (ch === '"') quoted = false;
      else cell += ch;
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      row.push(cell); cell = "";
    } else if (ch === "\n") {
      row.push(cell); rows.push(row); row = []; cell = "";
    } else {
      cell += ch;
    }
  }
  if (cell !== "" || row.length) { row.push(cell); rows.push(row); }
  return rows;
}

describe("comparison export", () => {
  it("round-trips through a standard CSV parser", () => {
    const tricky = entry("a", 'label, with "quotes"',
                         { ...draftA, intervention_text: "line one\nline two, really" },
                         responseA);
    const plain = entry("b", "plain", draftA, responseA);
    const csv = exportComparisonCsv([tricky, plain]);
    const grid = parseCsv(csv);
    expect(grid[0]).toEqual(["field", 'label, with "quotes"', "plain"]);
    const byField = Object.fromEntries(grid.slice(1).map((r) => [r[0], r.slice(1)]));
    expect(byField.intervention_text?.[0]).toBe("line one\nline two, really");
    expect(byField.location).toEqual(["Denmark", "Denmark"]);
    expect(byField.r_mean?.[1]).toBe("-0.148");
    const width = grid[0]?.length;
    for (const row of grid) expect(row).toHaveLength(width!);
  });
});
