import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import type { ScenarioRequest } from "../src/types.js";
import { validateDraft } from "../src/validate.js";

interface FixtureCase {
  name: string;
  patch: Record<string, unknown>;
  valid: boolean;
  invalid_fields: string[];
}

const fixturePath = join(
  dirname(fileURLToPath(import.meta.url)),
  "..", "..", "fixtures", "scenario-validation.json",
);
const fixture = JSON.parse(readFileSync(fixturePath, "utf-8")) as {
  base: Record<string, unknown>;
  cases: FixtureCase[];
};

describe("shared validation fixture (client side)", () => {
  for (const testCase of fixture.cases) {
    it(testCase.name, () => {
      const draft = { ...fixture.base, ...testCase.patch } as Partial<ScenarioRequest>;
      const result = validateDraft(draft);
      expect(result.valid).toBe(testCase.valid);
      expect(Object.keys(result.errors).sort())
        .toEqual([...testCase.invalid_fields].sort());
    });
  }

  it("emits the server's message for non-positive sample sizes", () => {
    const draft = { ...fixture.base, sample_size: 0 } as Partial<ScenarioRequest>;
    expect(validateDraft(draft).errors.sample_size)
      .toBe("sample_size must be positive");
  });
});
