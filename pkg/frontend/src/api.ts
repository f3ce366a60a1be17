/** Thin fetch client for the scenario API.
 *
 * At most one prediction is considered live per client: each call takes a
 * token, and responses arriving after a newer request started are reported
 * as stale so the UI can drop them.
 */

import type { FieldError, NaiveBaseline, ScenarioRequest, ScenarioResponse } from "./types.js";

export type PredictOutcome =
  | { kind: "ok"; response: ScenarioResponse }
  | { kind: "stale" }
  | { kind: "field-errors"; errors: FieldError[] }
  | { kind: "backend-error"; message: string; retryable: boolean };

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private token = 0;

  constructor(
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
    private readonly baseUrl: string = "",
  ) {}

  async predict(request: ScenarioRequest): Promise<PredictOutcome> {
    const myToken = ++this.token;
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/api/predict`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
      });
    } catch (err) {
      if (myToken !== this.token) return { kind: "stale" };
      return { kind: "backend-error", message: String(err), retryable: true };
    }
    if (myToken !== this.token) return { kind: "stale" };
    if (response.status === 400) {
      const body = (await response.json()) as { errors: FieldError[] };
      return { kind: "field-errors", errors: body.errors };
    }
    if (!response.ok) {
      const detail = await response.text();
      return {
        kind: "backend-error",
        message: `${response.status}: ${detail}`,
        retryable: response.status === 502,
      };
    }
    return { kind: "ok", response: (await response.json()) as ScenarioResponse };
  }

  async baseline(): Promise<NaiveBaseline | null> {
    try {
      const response = await this.fetchFn(`${this.baseUrl}/api/baseline`);
      if (!response.ok) return null;
      return (await response.json()) as NaiveBaseline;
    } catch {
      return null;
    }
  }
}
