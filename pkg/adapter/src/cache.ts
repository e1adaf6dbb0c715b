/**
 * Embedding cache keyed by image identity.
 *
 * Encoding dominates per-request cost on a real checkpoint (the image tower
 * runs once per image, the prompt decoder per click), so the server resolves
 * every image through here. Keys combine the resolved path with the file's
 * mtime: touching or rewriting an image invalidates its entry. Inline
 * (base64) images carry no stable identity and always re-encode.
 */

import { statSync } from "node:fs";
import { resolve } from "node:path";

import type { Embedding, ImageRef, SegmentationModel } from "./model.js";

/** Entries kept before the oldest is dropped (insertion order). */
const MAX_ENTRIES = 32;

export class EmbeddingCache {
  private entries = new Map<string, Embedding>();
  hits = 0;
  misses = 0;

  constructor(private capacity: number = MAX_ENTRIES) {}

  async resolve(model: SegmentationModel, ref: ImageRef): Promise<Embedding> {
    if (!("path" in ref)) {
      return model.encode(ref);
    }
    const key = `${resolve(ref.path)}@${statSync(ref.path).mtimeMs}`;
    const cached = this.entries.get(key);
    if (cached !== undefined) {
      this.hits++;
      return cached;
    }
    this.misses++;
    const embedding = await model.encode(ref);
    if (this.entries.size >= this.capacity) {
      const oldest = this.entries.keys().next().value;
      if (oldest !== undefined) {
        this.entries.delete(oldest);
      }
    }
    this.entries.set(key, embedding);
    return embedding;
  }

  get size(): number {
    return this.entries.size;
  }
}
