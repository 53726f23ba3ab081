/**
 * DOM wiring for the transcript editor: pick an utterance, click words to
 * select a range (shift-click extends) or a gap to place the insert
 * cursor, choose an operation, submit, and audition original vs edited.
 */

import { ApiClient, ApiError } from "./api.js";
import { Player } from "./player.js";
import { SubmitQueue } from "./queue.js";
import {
  allowsMode,
  clickGap,
  clickWord,
  isGapSelected,
  isWordSelected,
} from "./selection.js";
import {
  ComposeError,
  buildView,
  composeEdit,
  recordEdit,
  type EditMode,
  type TranscriptView,
} from "./transcript.js";
import type { UtteranceSummary } from "./schema.js";

const DEFAULT_SERVICE = `${location.protocol}//${location.hostname}:8571`;

const el = {
  service: document.getElementById("service-url") as HTMLInputElement,
  connect: document.getElementById("connect") as HTMLButtonElement,
  utterances: document.getElementById("utterances") as HTMLSelectElement,
  transcript: document.getElementById("transcript") as HTMLDivElement,
  playOriginal: document.getElementById("play-original") as HTMLButtonElement,
  mode: document.getElementById("mode") as HTMLSelectElement,
  newText: document.getElementById("new-text") as HTMLInputElement,
  submit: document.getElementById("submit") as HTMLButtonElement,
  banner: document.getElementById("banner") as HTMLDivElement,
  history: document.getElementById("history") as HTMLUListElement,
  status: document.getElementById("status") as HTMLSpanElement,
};

let client = new ApiClient(DEFAULT_SERVICE);
let summaries: UtteranceSummary[] = [];
let view: TranscriptView | null = null;
const player = new Player();
const queue = new SubmitQueue();

function banner(text: string, kind: "error" | "info" | "") {
  el.banner.textContent = text;
  el.banner.className = kind;
}

function renderTranscript() {
  el.transcript.replaceChildren();
  if (!view) return;
  const current = view;

  const addGap = (position: number) => {
    const gap = document.createElement("button");
    gap.className = "gap" + (isGapSelected(current.selection, position) ? " selected" : "");
    gap.title = `insert before word ${position}`;
    gap.textContent = "·";
    gap.onclick = () => {
      current.selection = clickGap(current.selection, position);
      renderTranscript();
    };
    el.transcript.append(gap);
  };

  let wordIndex = 0;
  addGap(0);
  for (const token of current.tokens) {
    if (token.kind === "pause") {
      const pause = document.createElement("span");
      pause.className = "pause";
      pause.title = `pause ${token.start_seconds.toFixed(2)}-${token.end_seconds.toFixed(2)}s`;
      pause.textContent = ",";
      el.transcript.append(pause);
      continue;
    }
    const word = document.createElement("button");
    const index = token.word_index;
    word.className = "word" + (isWordSelected(current.selection, index) ? " selected" : "");
    word.textContent = token.text;
    word.title =
      `word ${index}: frames ${token.start_frame}-${token.end_frame}` +
      ` (${token.start_seconds.toFixed(2)}-${token.end_seconds.toFixed(2)}s)`;
    word.onclick = (event) => {
      current.selection = clickWord(current.selection, index, event.shiftKey);
      renderTranscript();
    };
    el.transcript.append(word);
    wordIndex = index + 1;
    addGap(wordIndex);
  }
  updateControls();
}

function updateControls() {
  const mode = el.mode.value as EditMode;
  el.newText.disabled = mode === "delete";
  const haveSelection = view !== null && allowsMode(view.selection, mode);
  const needText = mode !== "delete" && el.newText.value.trim() === "";
  el.submit.disabled = !haveSelection || needText || queue.pending > 0;
}

function renderHistory() {
  el.history.replaceChildren();
  if (!view) return;
  view.history.forEach((entry, index) => {
    const item = document.createElement("li");
    const label = document.createElement("span");
    const req = entry.request;
    const what =
      req.operation === "insert"
        ? `insert "${req.new_text}" at gap ${req.position}`
        : req.operation === "delete"
          ? `delete words ${req.first_word}-${req.last_word}`
          : `replace words ${req.first_word}-${req.last_word} with "${req.new_text}"`;
    label.textContent = `#${index + 1} ${what} - ${entry.job.status}`;
    item.append(label);
    if (entry.job.status === "done" && entry.job.result_audio_id) {
      const d = entry.job.diagnostics;
      if (d && d.t_fusion !== null) {
        const info = document.createElement("span");
        info.className = "diag";
        info.textContent = ` fusion@${d.t_fusion} A=${d.len_A} B'=${d.len_B_edit} C=${d.len_C}`;
        item.append(info);
      }
      const play = document.createElement("button");
      play.textContent = "play edited";
      play.onclick = () => player.play(client.audioUrl(entry.job.result_audio_id!));
      item.append(play);
    } else if (entry.job.error_message) {
      const err = document.createElement("span");
      err.className = "failed";
      err.textContent = ` ${entry.job.error_message}`;
      item.append(err);
    }
    el.history.append(item);
  });
}

async function loadUtterance(id: string) {
  if (!id) return;
  const summary = summaries.find((s) => s.id === id);
  try {
    const alignment = await client.getAlignment(id);
    view = buildView(id, summary ? summary.text : "", alignment);
    banner("", "");
    renderTranscript();
    renderHistory();
    el.playOriginal.disabled = false;
  } catch (err) {
    view = null;
    renderTranscript();
    banner(err instanceof ApiError ? err.message : String(err), "error");
  }
}

async function connect() {
  client = new ApiClient(el.service.value.replace(/\/+$/, ""));
  try {
    const health = await client.health();
    summaries = await client.listUtterances();
    el.status.textContent = `connected (${health.utterances} utterances)`;
    el.utterances.replaceChildren(
      ...summaries.map((s) => {
        const option = document.createElement("option");
        option.value = s.id;
        option.textContent = `${s.id}: ${s.text}`;
        return option;
      }),
    );
    if (summaries.length > 0) await loadUtterance(summaries[0]!.id);
  } catch (err) {
    el.status.textContent = "disconnected";
    banner(err instanceof ApiError ? err.message : String(err), "error");
  }
}

async function submit() {
  if (!view) return;
  const current = view;
  const mode = el.mode.value as EditMode;
  try {
    const request = composeEdit(current, mode, el.newText.value);
    updateControls();
    const job = await queue.enqueue(() => client.submitEdit(request));
    view = recordEdit(current, request, job);
    banner(
      job.status === "done" ? "" : job.error_message ?? "edit failed",
      job.status === "done" ? "" : "error",
    );
    renderHistory();
  } catch (err) {
    if (err instanceof ComposeError) {
      banner(err.message, "error");
    } else if (err instanceof ApiError) {
      banner(`submit failed, not recorded: ${err.message}`, "error");
    } else {
      banner(String(err), "error");
    }
  } finally {
    updateControls();
  }
}

el.service.value = DEFAULT_SERVICE;
el.connect.onclick = () => void connect();
el.utterances.onchange = () => void loadUtterance(el.utterances.value);
el.playOriginal.onclick = () => {
  if (view) player.play(client.audioUrl(view.utteranceId));
};
el.mode.onchange = updateControls;
el.newText.oninput = updateControls;
el.submit.onclick = () => void submit();
void connect();
