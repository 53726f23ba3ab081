/**
 * Selection state over transcript word tokens: either a contiguous word
 * range (for delete/replace) or a single gap cursor between words (for
 * insert). Gap k sits before word k; gap wordCount sits after the last word.
 */

export type Selection =
  | { kind: "none" }
  | { kind: "range"; first: number; last: number }
  | { kind: "gap"; position: number };

export const NONE: Selection = { kind: "none" };

export function clickWord(current: Selection, word: number, extend: boolean): Selection {
  if (extend && current.kind === "range") {
    return {
      kind: "range",
      first: Math.min(current.first, word),
      last: Math.max(current.last, word),
    };
  }
  if (current.kind === "range" && current.first === word && current.last === word) {
    return NONE; // clicking the lone selected word clears it
  }
  return { kind: "range", first: word, last: word };
}

export function clickGap(current: Selection, position: number): Selection {
  if (current.kind === "gap" && current.position === position) {
    return NONE;
  }
  return { kind: "gap", position };
}

export function isWordSelected(selection: Selection, word: number): boolean {
  return selection.kind === "range" && selection.first <= word && word <= selection.last;
}

export function isGapSelected(selection: Selection, position: number): boolean {
  return selection.kind === "gap" && selection.position === position;
}

export function allowsMode(selection: Selection, mode: "delete" | "replace" | "insert"): boolean {
  if (mode === "insert") return selection.kind === "gap";
  return selection.kind === "range";
}
