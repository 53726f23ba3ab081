import { describe, expect, it } from "vitest";

import type { AlignmentResponse, EditJob } from "../src/schema.js";
import { EditRequestSchema } from "../src/schema.js";
import { ComposeError, buildView, composeEdit, recordEdit } from "../src/transcript.js";

function alignment(): AlignmentResponse {
  return {
    utterance_id: "utt-001",
    total_frames: 70,
    frame_hop_seconds: 0.0125,
    tokens: [
      { kind: "word", text: "hello", word_index: 0, start_frame: 0, end_frame: 31, start_seconds: 0, end_seconds: 0.3875 },
      { kind: "pause", text: "", word_index: 0, start_frame: 31, end_frame: 39, start_seconds: 0.3875, end_seconds: 0.4875 },
      { kind: "word", text: "world", word_index: 1, start_frame: 39, end_frame: 70, start_seconds: 0.4875, end_seconds: 0.875 },
    ],
  };
}

function doneJob(): EditJob {
  return {
    job_id: "edit-1",
    status: "done",
    request: {},
    result_audio_id: "edit-1",
    diagnostics: { t_fusion: 45, len_A: 39, len_B_edit: 20, len_C: 0, edited_durations: [5] },
    error_message: null,
  };
}

describe("buildView", () => {
  it("counts words and starts with no selection or history", () => {
    const view = buildView("utt-001", "hello, world", alignment());
    expect(view.wordCount).toBe(2);
    expect(view.selection).toEqual({ kind: "none" });
    expect(view.history).toEqual([]);
    expect(view.tokens).toHaveLength(3);
  });
});

describe("composeEdit", () => {
  it("maps a range selection to the replace schema", () => {
    const view = buildView("utt-001", "hello, world", alignment());
    view.selection = { kind: "range", first: 1, last: 1 };
    const request = composeEdit(view, "replace", "bright red");
    expect(request).toEqual({
      utterance_id: "utt-001",
      operation: "replace",
      first_word: 1,
      last_word: 1,
      new_text: "bright red",
    });
    expect(EditRequestSchema.safeParse(request).success).toBe(true);
  });

  it("maps a gap selection to the insert schema", () => {
    const view = buildView("utt-001", "hello, world", alignment());
    view.selection = { kind: "gap", position: 0 };
    const request = composeEdit(view, "insert", "well");
    expect(request).toEqual({
      utterance_id: "utt-001",
      operation: "insert",
      position: 0,
      new_text: "well",
    });
  });

  it("delete omits new_text entirely", () => {
    const view = buildView("utt-001", "hello, world", alignment());
    view.selection = { kind: "range", first: 0, last: 1 };
    const request = composeEdit(view, "delete", "");
    expect(request).toEqual({
      utterance_id: "utt-001",
      operation: "delete",
      first_word: 0,
      last_word: 1,
    });
    expect("new_text" in request).toBe(false);
  });

  it("blocks empty text for replace and insert", () => {
    const view = buildView("utt-001", "hello, world", alignment());
    view.selection = { kind: "range", first: 0, last: 0 };
    expect(() => composeEdit(view, "replace", "   ")).toThrow(ComposeError);
    view.selection = { kind: "gap", position: 1 };
    expect(() => composeEdit(view, "insert", "")).toThrow(ComposeError);
  });

  it("blocks mode/selection mismatches", () => {
    const view = buildView("utt-001", "hello, world", alignment());
    expect(() => composeEdit(view, "delete", "")).toThrow(ComposeError);
    view.selection = { kind: "range", first: 0, last: 0 };
    expect(() => composeEdit(view, "insert", "x")).toThrow(ComposeError);
    view.selection = { kind: "gap", position: 0 };
    expect(() => composeEdit(view, "replace", "x")).toThrow(ComposeError);
  });

  it("blocks selections past the end of the transcript", () => {
    const view = buildView("utt-001", "hello, world", alignment());
    view.selection = { kind: "range", first: 1, last: 2 };
    expect(() => composeEdit(view, "delete", "")).toThrow(ComposeError);
  });
});

describe("recordEdit", () => {
  it("history is append-only and preserves order", () => {
    let view = buildView("utt-001", "hello, world", alignment());
    view.selection = { kind: "range", first: 0, last: 0 };
    const first = composeEdit(view, "replace", "goodbye");
    view = recordEdit(view, first, doneJob());
    const second = composeEdit(view, "delete", "");
    view = recordEdit(view, second, { ...doneJob(), job_id: "edit-2" });
    expect(view.history).toHaveLength(2);
    expect(view.history[0]!.request).toEqual(first);
    expect(view.history[1]!.job.job_id).toBe("edit-2");
  });
});
