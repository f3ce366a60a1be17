import { describe, expect, it } from "vitest";

import { fmt3, pct } from "../src/format.js";
import { renderBackendError, renderFieldErrors, renderResults } from "../src/render.js";
import { baselineFixture, responseA } from "./fixtures.js";

describe("results panel", () => {
  it("matches the recorded snapshot", () => {
    expect(renderResults(responseA, baselineFixture)).toMatchSnapshot();
  });

  it("shows majority direction with vote share and whiskers", () => {
    const html = renderResults(responseA, null);
    expect(html).toContain(">negative</span>");
    expect(html).toContain("(75% of runs)");
    expect(html).toContain(`min ${fmt3(-0.231)} … max ${fmt3(0.052)}`);
    expect(html).toContain(`min ${fmt3(-0.475)} … max ${fmt3(0.104)}`);
  });

  it("includes the naive baseline only when available", () => {
    expect(renderResults(responseA, null)).not.toContain("naive baseline");
    const withBaseline = renderResults(responseA, baselineFixture);
    expect(withBaseline).toContain("naive baseline: predicts negative");
    expect(withBaseline).toContain("0.429");
    expect(withBaseline).toContain("0.950");
  });

  it("never fabricates numbers: every numeral traces to a response field", () => {
    const html = renderResults(responseA, baselineFixture);
    const allowed = new Set<string>();
    const agg = responseA.aggregate;
    for (const spread of [agg.r, agg.d]) {
      if (spread) {
        allowed.add(fmt3(spread.mean));
        allowed.add(fmt3(spread.min));
        allowed.add(fmt3(spread.max));
      }
    }
    if (agg.vote_share !== null) allowed.add(pct(agg.vote_share).replace("%", ""));
    allowed.add(pct(agg.direction_coverage).replace("%", ""));
    allowed.add(String(responseA.per_run.length));
    for (const run of responseA.per_run) {
      allowed.add(String(run.run));
      if (run.r_pred !== null) allowed.add(fmt3(run.r_pred));
      if (run.d_pred !== null) allowed.add(fmt3(run.d_pred));
      for (const token of run.raw_text.match(/-?\d+(?:\.\d+)?/g) ?? []) {
        allowed.add(token);
      }
    }
    allowed.add(fmt3(baselineFixture.mean_abs_r));
    allowed.add(fmt3(baselineFixture.mean_abs_d));
    for (const token of responseA.model_id.match(/\d+/g) ?? []) allowed.add(token);

    const text = html.replace(/<[^>]*>/g, " ");
    const rendered = text.match(/-?\d+(?:\.\d+)?/g) ?? [];
    for (const token of rendered) {
      expect(allowed, `numeral ${token} has no source field`).toContain(token);
    }
    expect(rendered.length).toBeGreaterThan(10);
  });

  it("handles runs without numeric predictions", () => {
    const sparse = {
      ...responseA,
      per_run: [{ run: 0, raw_text: "no idea", direction: null,
                  r_pred: null, d_pred: null }],
      aggregate: { majority_direction: null, vote_share: null,
                   direction_coverage: 0, r: null, d: null },
    };
    const html = renderResults(sparse, null);
    expect(html).toContain("no direction predicted");
    expect(html).toContain("no numeric prediction");
  });

  it("escapes raw model text", () => {
    const hostile = {
      ...responseA,
      per_run: [{ run: 0, raw_text: "<script>alert(1)</script>",
                  direction: null, r_pred: null, d_pred: null }],
    };
    const html = renderResults(hostile, null);
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("error states", () => {
  it("renders field errors inline with field anchors", () => {
    const html = renderFieldErrors([
      { field: "sample_size", message: "sample_size must be positive" },
    ]);
    expect(html).toContain('data-field="sample_size"');
    expect(html).toContain("sample_size must be positive");
  });

  it("renders backend errors with a retry affordance", () => {
    const html = renderBackendError("502: upstream exhausted");
    expect(html).toContain('data-action="retry"');
    expect(html).toContain("502: upstream exhausted");
  });
});
