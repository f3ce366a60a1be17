/** Browser bootstrap: wires the scenario form, results panel, and history. */

import { ApiClient } from "./api.js";
import { HistoryStore, exportComparisonCsv, renderComparison } from "./history.js";
import { renderBackendError, renderFieldErrors, renderResults } from "./render.js";
import type { HistoryEntry, NaiveBaseline, ScenarioRequest, ScenarioResponse } from "./types.js";
import { validateDraft } from "./validate.js";

const api = new ApiClient();
const history = new HistoryStore(window.localStorage);

let baseline: NaiveBaseline | null = null;
let lastDraft: ScenarioRequest | null = null;
let lastResponse: ScenarioResponse | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function readDraft(): Partial<ScenarioRequest> {
  const value = (id: string) => (el<HTMLInputElement>(id)).value;
  const num = (id: string) => {
    const raw = value(id).trim();
    return raw === "" ? Number.NaN : Number(raw);
  };
  const draft: Partial<ScenarioRequest> = {
    intervention_text: value("intervention_text"),
    intervention_category: value("intervention_category"),
    location: value("location"),
    year: num("year"),
    population: value("population"),
    sample_size: num("sample_size"),
    treatment_n: num("treatment_n"),
    control_n: num("control_n"),
    n_runs: num("n_runs"),
    temperature: num("temperature"),
  };
  const title = value("title").trim();
  const goal = value("goal").trim();
  if (title) draft.title = title;
  if (goal) draft.goal = goal;
  return draft;
}

function refreshValidation(): boolean {
  const { valid, errors } = validateDraft(readDraft());
  for (const node of document.querySelectorAll<HTMLElement>(".inline-error")) {
    const field = node.dataset.for ?? "";
    node.textContent = errors[field] ?? "";
  }
  el<HTMLButtonElement>("submit").disabled = !valid;
  return valid;
}

async function submit(): Promise<void> {
  if (!refreshValidation()) return;
  const draft = readDraft() as ScenarioRequest;
  const results = el<HTMLElement>("results");
  results.innerHTML = `<p class="pending">predicting…</p>`;
  const outcome = await api.predict(draft);
  switch (outcome.kind) {
    case "stale":
      return; // superseded by a newer draft
    case "field-errors":
      results.innerHTML = renderFieldErrors(outcome.errors);
      return;
    case "backend-error":
      results.innerHTML = renderBackendError(outcome.message);
      results.querySelector<HTMLButtonElement>("[data-action=retry]")
        ?.addEventListener("click", () => void submit());
      return;
    case "ok":
      lastDraft = draft;
      lastResponse = outcome.response;
      results.innerHTML = renderResults(outcome.response, baseline);
      el<HTMLButtonElement>("save-entry").disabled = false;
  }
}

function selectedEntries(): HistoryEntry[] {
  const ids = Array.from(
    document.querySelectorAll<HTMLInputElement>(".history-select:checked"),
  ).map((box) => box.value);
  return history.list().filter((e) => ids.includes(e.id));
}

function refreshHistory(): void {
  const entries = history.list();
  el<HTMLElement>("history-list").innerHTML = entries.map((entry) => {
    const direction = entry.response.aggregate.majority_direction ?? "?";
    return (
      `<li><label><input type="checkbox" class="history-select" value="${entry.id}"> ` +
      `${entry.label} — ${direction}</label></li>`
    );
  }).join("");
}

function compareSelected(): void {
  const entries = selectedEntries();
  const panel = el<HTMLElement>("comparison");
  if (entries.length < 2) {
    panel.innerHTML = `<p class="hint">select at least two entries to compare</p>`;
    return;
  }
  panel.innerHTML = renderComparison(entries);
}

function exportSelected(): void {
  const entries = selectedEntries();
  if (entries.length < 2) return;
  const blob = new Blob([exportComparisonCsv(entries)], { type: "text/csv" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = "scenario-comparison.csv";
  link.click();
  URL.revokeObjectURL(link.href);
}

function init(): void {
  el<HTMLFormElement>("scenario-form").addEventListener("input", refreshValidation);
  el<HTMLFormElement>("scenario-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });
  el<HTMLButtonElement>("save-entry").addEventListener("click", () => {
    if (!lastDraft || !lastResponse) return;
    const label = el<HTMLInputElement>("entry-label").value.trim()
      || `${lastDraft.intervention_category} @ ${lastDraft.location}`;
    history.add(label, lastDraft, lastResponse);
    refreshHistory();
  });
  el<HTMLButtonElement>("compare").addEventListener("click", compareSelected);
  el<HTMLButtonElement>("export").addEventListener("click", exportSelected);
  el<HTMLButtonElement>("clear-history").addEventListener("click", () => {
    history.clear();
    refreshHistory();
    el<HTMLElement>("comparison").innerHTML = "";
  });
  refreshValidation();
  refreshHistory();
  void api.baseline().then((b) => { baseline = b; });
}

init();
