/** Recorded response/draft fixtures shared across the UI tests. */

import type { HistoryEntry, ScenarioRequest, ScenarioResponse } from "../src/types.js";

export const draftA: ScenarioRequest = {
  intervention_text: "Default to the vegetarian dish in the canteen line.",
  intervention_category: "nudge",
  location: "Denmark",
  year: 2023,
  population: "university students",
  sample_size: 640,
  treatment_n: 320,
  control_n: 320,
  n_runs: 4,
  temperature: 0,
};

export const responseA: ScenarioResponse = {
  model_id: "mock:nearest:abc123def456",
  prompt_digest: "11aa22bb33cc",
  n_runs: 4,
  temperature: 0,
  per_run: [
    { run: 0, raw_text: "direction: negative; r: -0.214; d: -0.438",
      direction: "negative", r_pred: -0.214, d_pred: -0.438 },
    { run: 1, raw_text: "direction: negative; r: -0.198; d: -0.404",
      direction: "negative", r_pred: -0.198, d_pred: -0.404 },
    { run: 2, raw_text: "direction: negative; r: -0.231; d: -0.475",
      direction: "negative", r_pred: -0.231, d_pred: -0.475 },
    { run: 3, raw_text: "direction: positive; r: 0.052; d: 0.104",
      direction: "positive", r_pred: 0.052, d_pred: 0.104 },
  ],
  aggregate: {
    majority_direction: "negative",
    vote_share: 0.75,
    direction_coverage: 1,
    r: { mean: -0.14775, min: -0.231, max: 0.052 },
    d: { mean: -0.30325, min: -0.475, max: 0.104 },
  },
};

export const baselineFixture = {
  modal_direction: "negative" as const,
  mean_abs_r: 0.429,
  mean_abs_d: 0.95,
};

export function entry(
  id: string,
  label: string,
  draft: ScenarioRequest,
  response: ScenarioResponse,
): HistoryEntry {
  return Object.freeze({ id, label, timestamp: 1700000000000, draft, response });
}
