/** Render-to-string views for the results panel and error states.
 *
 * Every statistic shown is read straight off a ScenarioResponse (or the
 * baseline payload); the snapshot test enforces that no other numerals
 * appear.
 */

import { escapeHtml, fmt3, pct } from "./format.js";
import type { FieldError, NaiveBaseline, ScenarioResponse, StatSpread } from "./types.js";

function spreadBlock(label: string, spread: StatSpread | null): string {
  if (spread === null) {
    return `<div class="stat"><span class="stat-label">${label}</span>` +
      `<span class="stat-value">no numeric prediction</span></div>`;
  }
  return (
    `<div class="stat"><span class="stat-label">${label}</span>` +
    `<span class="stat-value">${fmt3(spread.mean)}</span>` +
    `<span class="whiskers">min ${fmt3(spread.min)} … max ${fmt3(spread.max)}</span>` +
    `</div>`
  );
}

export function renderResults(
  response: ScenarioResponse,
  baseline: NaiveBaseline | null = null,
): string {
  const agg = response.aggregate;
  const direction = agg.majority_direction === null
    ? `<span class="direction unknown">no direction predicted</span>`
    : `<span class="direction ${agg.majority_direction}">${agg.majority_direction}</span>` +
      (agg.vote_share === null ? "" :
        ` <span class="vote-share">(${pct(agg.vote_share)} of runs)</span>`);

  const runRows = response.per_run.map((run) => {
    const r = run.r_pred === null ? "–" : fmt3(run.r_pred);
    const d = run.d_pred === null ? "–" : fmt3(run.d_pred);
    const dir = run.direction ?? "–";
    return `<tr><td>${run.run}</td><td>${dir}</td><td>${r}</td><td>${d}</td>` +
      `<td class="raw">${escapeHtml(run.raw_text)}</td></tr>`;
  }).join("");

  const baselineBlock = baseline === null ? "" : (
    `<div class="baseline">naive baseline: predicts ${baseline.modal_direction}, ` +
    `|r| ${fmt3(baseline.mean_abs_r)}, |d| ${fmt3(baseline.mean_abs_d)}</div>`
  );

  return (
    `<section class="results">` +
    `<div class="headline">${direction}</div>` +
    `<div class="coverage">direction coverage ${pct(agg.direction_coverage)}</div>` +
    spreadBlock("r", agg.r) +
    spreadBlock("d", agg.d) +
    baselineBlock +
    `<details><summary>runs (${response.per_run.length}) — model ${escapeHtml(response.model_id)}</summary>` +
    `<table class="runs"><thead><tr><th>run</th><th>direction</th><th>r</th>` +
    `<th>d</th><th>raw</th></tr></thead><tbody>${runRows}</tbody></table>` +
    `</details>` +
    `</section>`
  );
}

export function renderFieldErrors(errors: FieldError[]): string {
  const items = errors
    .map((e) => `<li data-field="${escapeHtml(e.field)}">${escapeHtml(e.message)}</li>`)
    .join("");
  return `<ul class="field-errors">${items}</ul>`;
}

export function renderBackendError(message: string): string {
  return (
    `<div class="backend-error">` +
    `<p>The prediction service is unavailable: ${escapeHtml(message)}</p>` +
    `<button type="button" data-action="retry">Retry</button>` +
    `</div>`
  );
}
