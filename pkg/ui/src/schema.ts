/**
 * Wire types for the speechedit service, with zod validation so every
 * request this client emits is checked against the EditRequest schema
 * before it leaves the browser.
 */

import { z } from "zod";

export const ReplaceRequestSchema = z
  .object({
    utterance_id: z.string().min(1),
    operation: z.literal("replace"),
    first_word: z.number().int().nonnegative(),
    last_word: z.number().int().nonnegative(),
    new_text: z.string().trim().min(1),
  })
  .refine((r) => r.first_word <= r.last_word, {
    message: "first_word must not exceed last_word",
  });

export const DeleteRequestSchema = z
  .object({
    utterance_id: z.string().min(1),
    operation: z.literal("delete"),
    first_word: z.number().int().nonnegative(),
    last_word: z.number().int().nonnegative(),
  })
  .refine((r) => r.first_word <= r.last_word, {
    message: "first_word must not exceed last_word",
  });

export const InsertRequestSchema = z.object({
  utterance_id: z.string().min(1),
  operation: z.literal("insert"),
  position: z.number().int().nonnegative(),
  new_text: z.string().trim().min(1),
});

export const EditRequestSchema = z.union([
  ReplaceRequestSchema,
  DeleteRequestSchema,
  InsertRequestSchema,
]);

export type EditRequest = z.infer<typeof EditRequestSchema>;

export const UtteranceSummarySchema = z.object({
  id: z.string(),
  text: z.string(),
  speaker_id: z.string(),
  duration_seconds: z.number(),
});
export type UtteranceSummary = z.infer<typeof UtteranceSummarySchema>;

export const TokenSchema = z.object({
  kind: z.enum(["word", "pause"]),
  text: z.string(),
  word_index: z.number().int(),
  start_frame: z.number().int(),
  end_frame: z.number().int(),
  start_seconds: z.number(),
  end_seconds: z.number(),
});
export type Token = z.infer<typeof TokenSchema>;

export const AlignmentResponseSchema = z.object({
  utterance_id: z.string(),
  total_frames: z.number().int(),
  frame_hop_seconds: z.number(),
  tokens: z.array(TokenSchema),
});
export type AlignmentResponse = z.infer<typeof AlignmentResponseSchema>;

export const EditJobSchema = z.object({
  job_id: z.string(),
  status: z.enum(["pending", "done", "failed"]),
  request: z.record(z.unknown()),
  result_audio_id: z.string().nullable(),
  diagnostics: z
    .object({
      t_fusion: z.number().int().nullable(),
      len_A: z.number().int(),
      len_B_edit: z.number().int(),
      len_C: z.number().int(),
      edited_durations: z.array(z.number().int()),
    })
    .nullable(),
  error_message: z.string().nullable(),
});
export type EditJob = z.infer<typeof EditJobSchema>;

export const ErrorBodySchema = z.object({
  error: z.string(),
  message: z.string(),
});
