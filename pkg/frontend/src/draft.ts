/** Local model of the target editor: a drag-reorderable feature list,
 * per-feature sign toggles, and a free-text preference box.
 *
 * The ordered list must stay a permutation of the run's features; the text
 * box, when non-empty, wins over the manual order (the server, not the UI,
 * parses it — single source of truth for the preference language). */

import type { CompiledTarget, TargetPayload } from "./api.js";

export type Sign = -1 | 0 | 1;

export interface TargetDraft {
  /** Run feature names in their canonical (server) order. */
  features: string[];
  /** Current editor order; always a permutation of `features`. */
  order: string[];
  /** Sign per feature name; 0 = unspecified. */
  signs: Record<string, Sign>;
  /** Free-text preference; submitted verbatim when non-empty. */
  text: string;
}

export function newDraft(features: string[]): TargetDraft {
  const signs: Record<string, Sign> = {};
  for (const f of features) signs[f] = 0;
  return { features: [...features], order: [...features], signs, text: "" };
}

/** Move the item at `from` so it lands at index `to` (drag-drop semantics). */
export function moveFeature(draft: TargetDraft, from: number, to: number): TargetDraft {
  const order = [...draft.order];
  if (from < 0 || from >= order.length || to < 0 || to >= order.length) {
    return draft;
  }
  const [item] = order.splice(from, 1);
  order.splice(to, 0, item);
  return { ...draft, order };
}

/** Cycle a feature's sign: unspecified -> + -> - -> unspecified. */
export function toggleSign(draft: TargetDraft, feature: string): TargetDraft {
  const next: Record<Sign, Sign> = { 0: 1, 1: -1, [-1]: 0 };
  const current = draft.signs[feature];
  if (current === undefined) return draft;
  return { ...draft, signs: { ...draft.signs, [feature]: next[current] } };
}

/** The permutation invariant; violated drafts are never submitted. */
export function isValid(draft: TargetDraft): boolean {
  if (draft.order.length !== draft.features.length) return false;
  const canonical = [...draft.features].sort();
  const current = [...draft.order].sort();
  return canonical.every((name, i) => name === current[i]);
}

/** Server payload: free text verbatim if present, else {ranking, signs}.
 * ranking[i] is the 1-based rank of canonical feature i in the edited order. */
export function toPayload(draft: TargetDraft, targetId?: string): TargetPayload {
  if (!isValid(draft)) {
    throw new Error("draft order is not a permutation of the run features");
  }
  const payload: TargetPayload = targetId ? { target_id: targetId } : {};
  const text = draft.text.trim();
  if (text.length > 0) {
    payload.text = text;
    return payload;
  }
  payload.ranking = draft.features.map((f) => draft.order.indexOf(f) + 1);
  payload.signs = draft.features.map((f) => draft.signs[f]);
  return payload;
}

/** Rebuild an editor draft from a server-compiled target ("refine
 * preferences" prefill). Lossless for full rankings: prefill -> toPayload
 * reproduces the compiled ranking and signs exactly. */
export function prefillFromCompiled(
  features: string[],
  compiled: CompiledTarget,
): TargetDraft {
  if (compiled.ranking.length !== features.length) {
    throw new Error("compiled ranking length does not match feature count");
  }
  const order = new Array<string>(features.length);
  compiled.ranking.forEach((rank, i) => {
    order[rank - 1] = features[i];
  });
  const signs: Record<string, Sign> = {};
  features.forEach((f, i) => {
    signs[f] = (compiled.signs ? compiled.signs[i] : 0) as Sign;
  });
  return { features: [...features], order, signs, text: "" };
}
