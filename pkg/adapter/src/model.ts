/**
 * Model abstraction shared by the stub and the checkpoint-backed backend.
 *
 * encode() is the expensive half (image embedding), segment() the cheap half
 * (prompt decoding), mirroring how SAM splits its forward pass. The server
 * routes every image through an EmbeddingCache so repeated prompts on the
 * same file skip the encode.
 */

import { readFileSync } from "node:fs";

import type { Rle } from "./rle.js";

/** Image handed to encode(): either a file on disk or raw PNG bytes. */
export type ImageRef = { path: string } | { bytes: Buffer };

export interface Embedding {
  width: number;
  height: number;
  /** Backend-private encoder state; the stub keeps nothing here. */
  handle: unknown;
}

export interface SegmentPrompt {
  points: Array<[number, number]>;
  labels: number[];
  box: [number, number, number, number] | null;
  multimask: boolean;
}

export interface MaskResult {
  maskRle: Rle;
  score: number;
}

export interface SaliencyResult {
  size: [number, number];
  values: number[];
}

export interface SegmentationModel {
  /** Model identifier reported in the hello message. */
  readonly name: string;
  encode(ref: ImageRef): Promise<Embedding>;
  segment(embedding: Embedding, prompt: SegmentPrompt): Promise<MaskResult>;
  /** Optional; backends without a saliency head leave it undefined. */
  saliency?(embedding: Embedding): Promise<SaliencyResult>;
  close(): void;
}

export function readImageBytes(ref: ImageRef): Buffer {
  if ("bytes" in ref) {
    return ref.bytes;
  }
  // Synchronous on purpose: the protocol serves one request at a time anyway.
  return readFileSync(ref.path);
}
