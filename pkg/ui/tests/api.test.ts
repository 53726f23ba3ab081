import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("lists utterances from the documented payload", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse([
        { id: "utt-001", text: "the bright moon", speaker_id: "alice", duration_seconds: 1.8 },
      ]),
    );
    const client = new ApiClient("http://svc", fetchMock as unknown as typeof fetch);
    const utterances = await client.listUtterances();
    expect(fetchMock).toHaveBeenCalledWith("http://svc/utterances", undefined);
    expect(utterances[0]!.id).toBe("utt-001");
  });

  it("posts edit requests as JSON and parses the job", async () => {
    const fetchMock = vi.fn(async (_url: string, init?: RequestInit) => {
      expect(init?.method).toBe("POST");
      expect(JSON.parse(String(init?.body))).toEqual({
        utterance_id: "utt-001",
        operation: "insert",
        position: 2,
        new_text: "green",
      });
      return jsonResponse({
        job_id: "edit-xyz",
        status: "done",
        request: {},
        result_audio_id: "edit-xyz",
        diagnostics: { t_fusion: 7, len_A: 1, len_B_edit: 2, len_C: 3, edited_durations: [1] },
        error_message: null,
      });
    });
    const client = new ApiClient("http://svc", fetchMock as unknown as typeof fetch);
    const job = await client.submitEdit({
      utterance_id: "utt-001",
      operation: "insert",
      position: 2,
      new_text: "green",
    });
    expect(job.status).toBe("done");
  });

  it("surfaces the service error envelope", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse({ error: "not_found", message: "unknown utterance id 'x'" }, 404),
    );
    const client = new ApiClient("http://svc", fetchMock as unknown as typeof fetch);
    const err = await client.getAlignment("x").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    expect(err.code).toBe("not_found");
    expect(err.message).toContain("unknown utterance id");
  });

  it("wraps network failures", async () => {
    const fetchMock = vi.fn(async () => {
      throw new TypeError("connect ECONNREFUSED");
    });
    const client = new ApiClient("http://svc", fetchMock as unknown as typeof fetch);
    await expect(client.health()).rejects.toThrow(/unreachable/);
  });

  it("rejects malformed response shapes", async () => {
    const fetchMock = vi.fn(async () => jsonResponse({ nonsense: true }));
    const client = new ApiClient("http://svc", fetchMock as unknown as typeof fetch);
    await expect(client.health()).rejects.toThrow(/unexpected response shape/);
  });

  it("builds streaming audio urls", () => {
    const client = new ApiClient("http://svc");
    expect(client.audioUrl("edit-abc")).toBe("http://svc/audio/edit-abc");
  });
});
