/** Client-side draft validation.
 *
 * Must stay field-for-field identical to the server's rules; the shared
 * fixture in fixtures/scenario-validation.json is asserted against both
 * sides.
 */

import { CATEGORIES, type ScenarioRequest } from "./types.js";

export const YEAR_MIN = 1950;
export const YEAR_MAX = 2100;
export const MAX_RUNS = 50;

export interface ValidationResult {
  valid: boolean;
  errors: Record<string, string>;
}

function isBlank(value: unknown): boolean {
  return typeof value !== "string" || value.trim() === "";
}

function isInt(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value);
}

export function validateDraft(draft: Partial<ScenarioRequest>): ValidationResult {
  const errors: Record<string, string> = {};

  for (const field of ["intervention_text", "location", "population"] as const) {
    if (isBlank(draft[field])) {
      errors[field] = `${field} must be nonempty`;
    }
  }

  if (!CATEGORIES.includes(draft.intervention_category as never)) {
    errors.intervention_category =
      `intervention_category must be one of ${CATEGORIES.join(", ")}`;
  }

  if (!isInt(draft.year)) {
    errors.year = "year must be an integer";
  } else if (draft.year < YEAR_MIN || draft.year > YEAR_MAX) {
    errors.year = `year must be between ${YEAR_MIN} and ${YEAR_MAX}`;
  }

  for (const field of ["sample_size", "treatment_n", "control_n"] as const) {
    const value = draft[field];
    if (!isInt(value) || value < 1) {
      errors[field] = `${field} must be positive`;
    }
  }

  const runs = draft.n_runs ?? 10;
  if (!isInt(runs) || runs < 1 || runs > MAX_RUNS) {
    errors.n_runs = `n_runs must be between 1 and ${MAX_RUNS}`;
  }

  const temperature = draft.temperature ?? 1.0;
  if (typeof temperature !== "number" || Number.isNaN(temperature) || temperature < 0) {
    errors.temperature = "temperature must be nonnegative";
  }

  return { valid: Object.keys(errors).length === 0, errors };
}
