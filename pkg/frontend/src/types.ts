/** Wire types mirroring the service API. */

export type Direction = "positive" | "negative";

export const CATEGORIES = ["monetary", "information", "nudge", "other"] as const;
export type Category = (typeof CATEGORIES)[number];

export interface ScenarioRequest {
  intervention_text: string;
  intervention_category: string;
  location: string;
  year: number;
  population: string;
  sample_size: number;
  treatment_n: number;
  control_n: number;
  title?: string;
  goal?: string;
  model?: string;
  n_runs: number;
  temperature: number;
}

export interface RunPrediction {
  run: number;
  raw_text: string;
  direction: Direction | null;
  r_pred: number | null;
  d_pred: number | null;
}

export interface StatSpread {
  mean: number;
  min: number;
  max: number;
}

export interface ScenarioAggregate {
  majority_direction: Direction | null;
  vote_share: number | null;
  direction_coverage: number;
  r: StatSpread | null;
  d: StatSpread | null;
}

export interface ScenarioResponse {
  model_id: string;
  prompt_digest: string;
  n_runs: number;
  temperature: number;
  per_run: RunPrediction[];
  aggregate: ScenarioAggregate;
}

export interface NaiveBaseline {
  modal_direction: Direction;
  mean_abs_r: number;
  mean_abs_d: number;
}

export interface FieldError {
  field: string;
  message: string;
}

/** One stored what-if: immutable once added to history. */
export interface HistoryEntry {
  id: string;
  label: string;
  timestamp: number;
  draft: ScenarioRequest;
  response: ScenarioResponse;
}
