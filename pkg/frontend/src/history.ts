/** Client-local scenario history: storage, comparison, CSV export.
 *
 * History lives in browser storage only (the service stays stateless) and
 * entries are frozen once stored.
 */

import { fmt3, pct, escapeHtml } from "./format.js";
import type { HistoryEntry, ScenarioRequest, ScenarioResponse } from "./types.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const DEFAULT_KEY = "nudgecast-history-v1";
const MAX_ENTRIES = 100;

export class HistoryStore {
  constructor(
    private readonly storage: StorageLike,
    private readonly key: string = DEFAULT_KEY,
    private readonly max: number = MAX_ENTRIES,
  ) {}

  list(): HistoryEntry[] {
    const raw = this.storage.getItem(this.key);
    if (!raw) return [];
    try {
      return (JSON.parse(raw) as HistoryEntry[]).map((e) => Object.freeze(e));
    } catch {
      return [];
    }
  }

  add(
    label: string,
    draft: ScenarioRequest,
    response: ScenarioResponse,
    now: () => number = Date.now,
  ): HistoryEntry {
    const entry: HistoryEntry = Object.freeze({
      id: `${now()}-${Math.random().toString(36).slice(2, 8)}`,
      label,
      timestamp: now(),
      draft: { ...draft },
      response,
    });
    const entries = [entry, ...this.list()].slice(0, this.max);
    this.storage.setItem(this.key, JSON.stringify(entries));
    return entry;
  }

  remove(id: string): void {
    const kept = this.list().filter((e) => e.id !== id);
    this.storage.setItem(this.key, JSON.stringify(kept));
  }

  clear(): void {
    this.storage.removeItem(this.key);
  }
}

export interface ComparisonRow {
  field: string;
  values: string[];
  differs: boolean;
}

function cell(value: unknown): string {
  if (value === null || value === undefined) return "";
  if (typeof value === "number") return String(value);
  return String(value);
}

/** Feature and prediction rows for >= 2 selected entries. */
export function compareEntries(entries: HistoryEntry[]): ComparisonRow[] {
  if (entries.length < 2) {
    throw new Error("comparison needs at least two history entries");
  }
  const featureFields: (keyof ScenarioRequest)[] = [
    "title", "goal", "intervention_text", "intervention_category",
    "location", "year", "population",
    "sample_size", "treatment_n", "control_n", "n_runs", "temperature",
  ];
  const rows: ComparisonRow[] = [];
  const push = (field: string, values: string[]) => {
    rows.push({
      field,
      values,
      differs: values.some((v) => v !== values[0]),
    });
  };
  for (const field of featureFields) {
    push(field, entries.map((e) => cell(e.draft[field])));
  }
  push("model", entries.map((e) => e.response.model_id));
  push("majority_direction",
       entries.map((e) => cell(e.response.aggregate.majority_direction)));
  push("vote_share", entries.map((e) => {
    const share = e.response.aggregate.vote_share;
    return share === null ? "" : pct(share);
  }));
  for (const stat of ["r", "d"] as const) {
    push(`${stat}_mean`, entries.map((e) => {
      const spread = e.response.aggregate[stat];
      return spread === null ? "" : fmt3(spread.mean);
    }));
    push(`${stat}_spread`, entries.map((e) => {
      const spread = e.response.aggregate[stat];
      return spread === null ? "" : `${fmt3(spread.min)} … ${fmt3(spread.max)}`;
    }));
  }
  return rows;
}

export function renderComparison(entries: HistoryEntry[]): string {
  const rows = compareEntries(entries);
  const header = ["field", ...entries.map((e) => escapeHtml(e.label))]
    .map((h) => `<th>${h}</th>`).join("");
  const body = rows.map((row) => {
    const cls = row.differs ? ` class="diff"` : "";
    const cells = row.values.map((v) => `<td>${escapeHtml(v)}</td>`).join("");
    return `<tr${cls}><td>${row.field}</td>${cells}</tr>`;
  }).join("");
  return (
    `<table class="comparison"><thead><tr>${header}</tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

function csvCell(value: string): string {
  if (/[",\n]/.test(value)) {
    return `"${value.replace(/"/g, '""')}"`;
  }
  return value;
}

/** Delimited export of the comparison table, spreadsheet-importable. */
export function exportComparisonCsv(entries: HistoryEntry[]): string {
  const rows = compareEntries(entries);
  const lines = [
    ["field", ...entries.map((e) => e.label)].map(csvCell).join(","),
    ...rows.map((row) => [row.field, ...row.values].map(csvCell).join(",")),
  ];
  return lines.join("\n") + "\n";
}
