/**
 * Typed client for the speechedit HTTP API. Responses are validated with
 * the shared zod schemas; transport and server errors surface as ApiError.
 */

import {
  AlignmentResponseSchema,
  EditJobSchema,
  ErrorBodySchema,
  UtteranceSummarySchema,
} from "./schema.js";
import type { AlignmentResponse, EditJob, EditRequest, UtteranceSummary } from "./schema.js";
import { z } from "zod";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number | null = null,
    readonly code: string | null = null,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(schema: z.ZodType<T>, path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const parsed = ErrorBodySchema.safeParse(body);
      if (parsed.success) {
        throw new ApiError(parsed.data.message, response.status, parsed.data.error);
      }
      throw new ApiError(`request failed with status ${response.status}`, response.status);
    }
    const parsed = schema.safeParse(body);
    if (!parsed.success) {
      throw new ApiError(`unexpected response shape for ${path}: ${parsed.error.message}`);
    }
    return parsed.data;
  }

  health(): Promise<{ status: string; utterances: number }> {
    return this.request(
      z.object({ status: z.string(), utterances: z.number().int() }),
      "/health",
    );
  }

  listUtterances(): Promise<UtteranceSummary[]> {
    return this.request(z.array(UtteranceSummarySchema), "/utterances");
  }

  getAlignment(utteranceId: string): Promise<AlignmentResponse> {
    return this.request(
      AlignmentResponseSchema,
      `/utterances/${encodeURIComponent(utteranceId)}/alignment`,
    );
  }

  submitEdit(request: EditRequest): Promise<EditJob> {
    return this.request(EditJobSchema, "/edits", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  /** Streaming URL for an original utterance or an edited artifact. */
  audioUrl(audioId: string): string {
    return `${this.baseUrl}/audio/${encodeURIComponent(audioId)}`;
  }
}
