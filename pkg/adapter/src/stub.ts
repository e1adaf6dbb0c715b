/**
 * Weight-free stub model.
 *
 * Implements the documented stub contract so the harness validator (and our
 * own tests) can exercise the full wire protocol without a checkpoint: masks
 * are the union of radius-4 disks around foreground clicks plus the box
 * interior, scores are 0.5 (0.75 when multimask is requested), and saliency
 * is an exact-integer radial falloff from the image center in u16 fixed
 * point. Any deviation here is a bug; the validator compares pixels.
 */

import { pngSize } from "./png.js";
import { encodeMask } from "./rle.js";
import { readImageBytes } from "./model.js";
import type {
  Embedding,
  ImageRef,
  MaskResult,
  SaliencyResult,
  SegmentationModel,
  SegmentPrompt,
} from "./model.js";

const DISK_RADIUS = 4;

export class StubModel implements SegmentationModel {
  readonly name = "stub-disk4";

  /** Number of encode() calls, observable so tests can assert cache hits. */
  encodeCalls = 0;

  async encode(ref: ImageRef): Promise<Embedding> {
    this.encodeCalls++;
    const { width, height } = pngSize(readImageBytes(ref));
    return { width, height, handle: null };
  }

  async segment(embedding: Embedding, prompt: SegmentPrompt): Promise<MaskResult> {
    const { width, height } = embedding;
    if (prompt.points.length === 0 && prompt.box === null) {
      throw new Error("empty prompt: need points or a box");
    }
    const bits = new Uint8Array(height * width);
    const r2 = DISK_RADIUS * DISK_RADIUS;
    for (let i = 0; i < prompt.points.length; i++) {
      if (prompt.labels[i] !== 1) {
        continue;
      }
      const [px, py] = prompt.points[i];
      for (let y = 0; y < height; y++) {
        for (let x = 0; x < width; x++) {
          const dx = x - px;
          const dy = y - py;
          if (dx * dx + dy * dy <= r2) {
            bits[y * width + x] = 1;
          }
        }
      }
    }
    if (prompt.box !== null) {
      const [x0, y0, x1, y1] = prompt.box;
      for (let y = Math.max(0, y0); y <= Math.min(height - 1, y1); y++) {
        for (let x = Math.max(0, x0); x <= Math.min(width - 1, x1); x++) {
          bits[y * width + x] = 1;
        }
      }
    }
    return {
      maskRle: encodeMask(bits, height, width),
      score: prompt.multimask ? 0.75 : 0.5,
    };
  }

  async saliency(embedding: Embedding): Promise<SaliencyResult> {
    const { width, height } = embedding;
    // Doubled coordinates keep everything in integers; the true center of a
    // w-wide axis is at x = (w-1)/2, i.e. 2x = w-1.
    const d2 = (x: number, y: number) => {
      const dx = 2 * x - (width - 1);
      const dy = 2 * y - (height - 1);
      return dx * dx + dy * dy;
    };
    const dmax2 = Math.max(d2(0, 0), d2(width - 1, 0), d2(0, height - 1), d2(width - 1, height - 1));
    if (dmax2 === 0) {
      throw new Error("image too small for radial saliency");
    }
    const values: number[] = [];
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        values.push(Math.floor((65535 * (dmax2 - d2(x, y))) / dmax2));
      }
    }
    return { size: [height, width], values };
  }

  close(): void {}
}
