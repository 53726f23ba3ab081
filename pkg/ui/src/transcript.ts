/**
 * TranscriptView state: the aligned tokens of one utterance, the current
 * selection, and an append-only history of edits with their audio ids.
 *
 * Frame and second spans come exclusively from the service alignment
 * response; nothing here invents frame indices. Edits always apply to the
 * original utterance, not to earlier edits.
 */

import type { AlignmentResponse, EditJob, EditRequest, Token } from "./schema.js";
import { EditRequestSchema } from "./schema.js";
import type { Selection } from "./selection.js";

export type EditMode = "delete" | "replace" | "insert";

export interface HistoryEntry {
  request: EditRequest;
  job: EditJob;
}

export interface TranscriptView {
  utteranceId: string;
  text: string;
  tokens: Token[];
  wordCount: number;
  selection: Selection;
  history: HistoryEntry[];
}

export function buildView(
  utteranceId: string,
  text: string,
  alignment: AlignmentResponse,
): TranscriptView {
  const words = alignment.tokens.filter((t) => t.kind === "word");
  return {
    utteranceId,
    text,
    tokens: alignment.tokens,
    wordCount: words.length,
    selection: { kind: "none" },
    history: [],
  };
}

export class ComposeError extends Error {}

/**
 * Map the selection and mode onto the exact EditRequest wire schema.
 * Invalid combinations (wrong selection kind, empty text) throw before
 * anything reaches the network.
 */
export function composeEdit(
  view: TranscriptView,
  mode: EditMode,
  newText: string,
): EditRequest {
  const selection = view.selection;
  let candidate: unknown;
  if (mode === "insert") {
    if (selection.kind !== "gap") {
      throw new ComposeError("insert needs a gap cursor between words");
    }
    candidate = {
      utterance_id: view.utteranceId,
      operation: "insert",
      position: selection.position,
      new_text: newText,
    };
  } else {
    if (selection.kind !== "range") {
      throw new ComposeError(`${mode} needs a selected word range`);
    }
    if (selection.last >= view.wordCount) {
      throw new ComposeError("selection is out of range for this transcript");
    }
    candidate =
      mode === "delete"
        ? {
            utterance_id: view.utteranceId,
            operation: "delete",
            first_word: selection.first,
            last_word: selection.last,
          }
        : {
            utterance_id: view.utteranceId,
            operation: "replace",
            first_word: selection.first,
            last_word: selection.last,
            new_text: newText,
          };
  }
  const parsed = EditRequestSchema.safeParse(candidate);
  if (!parsed.success) {
    const issue = parsed.error.issues[0];
    throw new ComposeError(issue ? issue.message : "invalid edit request");
  }
  return parsed.data;
}

/** History is append-only; a new view object keeps rendering simple. */
export function recordEdit(
  view: TranscriptView,
  request: EditRequest,
  job: EditJob,
): TranscriptView {
  return { ...view, history: [...view.history, { request, job }] };
}
