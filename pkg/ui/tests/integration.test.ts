/**
 * End-to-end round trip against a real service on the toy corpus:
 * load -> select -> replace -> done -> edited audio streams and decodes.
 *
 * Needs the python package on PATH; enabled via RUN_SERVICE_INTEGRATION=1
 * (npm run test:integration).
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { EditRequestSchema } from "../src/schema.js";
import { buildView, composeEdit, recordEdit } from "../src/transcript.js";

const enabled = process.env.RUN_SERVICE_INTEGRATION === "1";
const cliAvailable =
  enabled && spawnSync("speechedit", ["--help"], { stdio: "ignore" }).status === 0;

const PORT = 8600 + (process.pid % 200);
const BASE = `http://127.0.0.1:${PORT}`;

function run(cmd: string, args: string[]) {
  const result = spawnSync(cmd, args, { encoding: "utf8" });
  if (result.status !== 0) {
    throw new Error(`${cmd} ${args.join(" ")} failed:\n${result.stdout}\n${result.stderr}`);
  }
}

function parseWavHeader(bytes: Uint8Array) {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const tag = (offset: number) =>
    String.fromCharCode(...bytes.subarray(offset, offset + 4));
  return {
    riff: tag(0),
    wave: tag(8),
    channels: view.getUint16(22, true),
    sampleRate: view.getUint32(24, true),
    bitsPerSample: view.getUint16(34, true),
  };
}

describe.skipIf(!cliAvailable)("service round trip", () => {
  let child: ChildProcess | null = null;
  let client: ApiClient;

  beforeAll(async () => {
    const work = mkdtempSync(join(tmpdir(), "speechedit-ui-"));
    run("python3", ["-m", "speechedit.toy", join(work, "corpus")]);
    run("speechedit", [
      "prep",
      "--manifest", join(work, "corpus", "manifest.jsonl"),
      "--lexicon", join(work, "corpus", "lexicon.txt"),
      "--alignments", join(work, "corpus", "alignments"),
      "--out", join(work, "cache"),
    ]);
    run("speechedit", [
      "train",
      "--cache", join(work, "cache"),
      "--out", join(work, "ckpt"),
      "--iterations", "8",
      "--seed", "7",
    ]);
    // Few vocoder iterations keep edit latency low; quality is irrelevant here.
    writeFileSync(join(work, "config.json"), JSON.stringify({ vocoder: "griffin_lim" }));
    child = spawn(
      "speechedit",
      [
        "serve",
        "--cache", join(work, "cache"),
        "--acoustic", join(work, "ckpt", "acoustic.ckpt"),
        "--duration", join(work, "ckpt", "duration.ckpt"),
        "--artifacts", join(work, "artifacts"),
        "--port", String(PORT),
      ],
      { stdio: "ignore" },
    );
    client = new ApiClient(BASE);
    const deadline = Date.now() + 60_000;
    for (;;) {
      try {
        await client.health();
        break;
      } catch {
        if (Date.now() > deadline) throw new Error("service never became healthy");
        await new Promise((r) => setTimeout(r, 500));
      }
    }
  }, 180_000);

  afterAll(() => {
    child?.kill();
  });

  it("loads, replaces a word, and streams playable edited audio", async () => {
    const utterances = await client.listUtterances();
    expect(utterances.map((u) => u.id)).toEqual(["utt-001", "utt-002"]);

    const summary = utterances[0]!;
    const alignment = await client.getAlignment(summary.id);
    let view = buildView(summary.id, summary.text, alignment);
    expect(view.wordCount).toBe(5);
    expect(view.tokens.some((t) => t.kind === "pause")).toBe(true);

    view.selection = { kind: "range", first: 1, last: 1 };
    const request = composeEdit(view, "replace", "dark");
    expect(EditRequestSchema.safeParse(request).success).toBe(true);

    const job = await client.submitEdit(request);
    view = recordEdit(view, request, job);
    expect(job.status).toBe("done");
    expect(job.result_audio_id).toBeTruthy();
    const d = job.diagnostics!;
    expect(d.t_fusion).not.toBeNull();
    expect(d.t_fusion!).toBeGreaterThan(d.len_A);
    expect(d.t_fusion!).toBeLessThanOrEqual(d.len_A + d.len_B_edit);

    const audio = await fetch(client.audioUrl(job.result_audio_id!));
    expect(audio.ok).toBe(true);
    const bytes = new Uint8Array(await audio.arrayBuffer());
    const header = parseWavHeader(bytes);
    expect(header.riff).toBe("RIFF");
    expect(header.wave).toBe("WAVE");
    expect(header.channels).toBe(1);
    expect(header.sampleRate).toBe(22050);
    expect(header.bitsPerSample).toBe(16);
    expect(bytes.length).toBeGreaterThan(1000);

    expect(view.history).toHaveLength(1);
  }, 120_000);

  it("original audio also streams", async () => {
    const audio = await fetch(client.audioUrl("utt-001"));
    expect(audio.ok).toBe(true);
    const bytes = new Uint8Array(await audio.arrayBuffer());
    expect(parseWavHeader(bytes).riff).toBe("RIFF");
  });

  it("surfaces the named out-of-vocabulary word on failure", async () => {
    const alignment = await client.getAlignment("utt-002");
    let view = buildView("utt-002", "", alignment);
    view.selection = { kind: "range", first: 2, last: 2 };
    const request = composeEdit(view, "replace", "xylophone");
    const job = await client.submitEdit(request);
    view = recordEdit(view, request, job);
    expect(job.status).toBe("failed");
    expect(job.error_message).toContain("xylophone");
    expect(job.result_audio_id).toBeNull();
  });

  it("two successive edits both land in history and audition", async () => {
    const utterances = await client.listUtterances();
    const summary = utterances[1]!;
    const alignment = await client.getAlignment(summary.id);
    let view = buildView(summary.id, summary.text, alignment);

    view.selection = { kind: "gap", position: 2 };
    const insert = composeEdit(view, "insert", "green");
    view = recordEdit(view, insert, await client.submitEdit(insert));

    view.selection = { kind: "range", first: 0, last: 0 };
    const del = composeEdit(view, "delete", "");
    view = recordEdit(view, del, await client.submitEdit(del));

    expect(view.history).toHaveLength(2);
    for (const entry of view.history) {
      expect(entry.job.status).toBe("done");
      const audio = await fetch(client.audioUrl(entry.job.result_audio_id!));
      expect(audio.ok).toBe(true);
    }
  }, 120_000);
});
