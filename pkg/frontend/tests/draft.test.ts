import { describe, expect, it } from "vitest";

import type { CompiledTarget } from "../src/api.js";
import {
  isValid,
  moveFeature,
  newDraft,
  prefillFromCompiled,
  toggleSign,
  toPayload,
} from "../src/draft.js";
import { loadFixture } from "./helpers.js";

const FEATURES = ["gauss_0", "gauss_1", "gauss_2", "gauss_3", "gauss_4"];

describe("target draft", () => {
  it("starts in reference order with unspecified signs", () => {
    const draft = newDraft(FEATURES);
    expect(draft.order).toEqual(FEATURES);
    expect(Object.values(draft.signs)).toEqual([0, 0, 0, 0, 0]);
    expect(isValid(draft)).toBe(true);
  });

  it("drag-reorder keeps the permutation invariant", () => {
    let draft = newDraft(FEATURES);
    draft = moveFeature(draft, 4, 0); // drag last to top
    draft = moveFeature(draft, 2, 3);
    expect(isValid(draft)).toBe(true);
    expect([...draft.order].sort()).toEqual([...FEATURES].sort());
    expect(draft.order[0]).toBe("gauss_4");
  });

  it("out-of-range drags are no-ops", () => {
    const draft = newDraft(FEATURES);
    expect(moveFeature(draft, -1, 2)).toBe(draft);
    expect(moveFeature(draft, 0, 99)).toBe(draft);
  });

  it("sign toggle cycles unspecified -> + -> - -> unspecified", () => {
    let draft = newDraft(FEATURES);
    draft = toggleSign(draft, "gauss_1");
    expect(draft.signs.gauss_1).toBe(1);
    draft = toggleSign(draft, "gauss_1");
    expect(draft.signs.gauss_1).toBe(-1);
    draft = toggleSign(draft, "gauss_1");
    expect(draft.signs.gauss_1).toBe(0);
  });

  it("builds a {ranking, signs} payload from a reorder", () => {
    let draft = newDraft(FEATURES);
    draft = moveFeature(draft, 1, 0); // gauss_1 first
    draft = toggleSign(draft, "gauss_2"); // +
    const payload = toPayload(draft, "t1");
    expect(payload).toEqual({
      target_id: "t1",
      ranking: [2, 1, 3, 4, 5],
      signs: [0, 0, 1, 0, 0],
    });
  });

  it("non-empty free text wins and is submitted verbatim", () => {
    let draft = newDraft(FEATURES);
    draft = moveFeature(draft, 4, 0); // reorder is ignored when text present
    draft = { ...draft, text: "  gauss_2 > gauss_0 " };
    expect(toPayload(draft)).toEqual({ text: "gauss_2 > gauss_0" });
  });

  it("sign toggles only, no reorder: reference order with signs", () => {
    let draft = newDraft(FEATURES);
    draft = toggleSign(draft, "gauss_0");
    draft = toggleSign(draft, "gauss_3");
    draft = toggleSign(draft, "gauss_3");
    expect(toPayload(draft)).toEqual({
      ranking: [1, 2, 3, 4, 5],
      signs: [1, 0, 0, -1, 0],
    });
  });

  it("refuses to submit a corrupted draft", () => {
    const draft = newDraft(FEATURES);
    const broken = { ...draft, order: [...draft.order.slice(1), "bogus"] };
    expect(isValid(broken)).toBe(false);
    expect(() => toPayload(broken)).toThrow(/permutation/);
  });

  it("round-trips the server-compiled target losslessly", () => {
    const fx = loadFixture("target_created").body as {
      compiled_target: CompiledTarget;
    };
    const prefilled = prefillFromCompiled(FEATURES, fx.compiled_target);
    expect(isValid(prefilled)).toBe(true);
    const payload = toPayload(prefilled);
    expect(payload.ranking).toEqual(fx.compiled_target.ranking);
    expect(payload.signs).toEqual(
      fx.compiled_target.signs ?? [0, 0, 0, 0, 0],
    );
  });

  it("round-trip holds for arbitrary full rankings with signs", () => {
    const compiled: CompiledTarget = {
      ranking: [3, 1, 5, 2, 4],
      signs: [1, -1, 0, 0, 1],
      source: "raw",
    };
    const payload = toPayload(prefillFromCompiled(FEATURES, compiled));
    expect(payload.ranking).toEqual(compiled.ranking);
    expect(payload.signs).toEqual(compiled.signs);
  });
});
