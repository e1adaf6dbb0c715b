/**
 * Wire protocol (version 1): newline-delimited JSON over stdio.
 *
 * The adapter speaks first with a hello line, then answers exactly one
 * request per line. Replies repeat the request id. Response serialization
 * pins key order so that well-known exchanges are byte-stable; JSON object
 * literals below are written in wire order on purpose.
 */

import type { ImageRef, SaliencyResult } from "./model.js";
import type { Rle } from "./rle.js";

export const PROTOCOL_VERSION = "1";

export interface SegmentRequest {
  kind: "segment";
  id: number;
  ref: ImageRef;
  points: Array<[number, number]>;
  labels: number[];
  box: [number, number, number, number] | null;
  multimask: boolean;
}

export interface SaliencyRequest {
  kind: "saliency";
  id: number;
  ref: ImageRef;
}

export type Request = SegmentRequest | SaliencyRequest;

/** Best-effort id extraction for error replies on requests that fail to parse. */
export function requestId(raw: unknown): number | null {
  if (typeof raw === "object" && raw !== null && "id" in raw) {
    const id = (raw as { id: unknown }).id;
    if (typeof id === "number" && Number.isInteger(id)) {
      return id;
    }
  }
  return null;
}

function imageRef(obj: Record<string, unknown>): ImageRef {
  if (typeof obj.image_b64 === "string") {
    return { bytes: Buffer.from(obj.image_b64, "base64") };
  }
  if (typeof obj.image_path === "string") {
    return { path: obj.image_path };
  }
  throw new Error("request carries neither image_path nor image_b64");
}

function numberPair(value: unknown, what: string): [number, number] {
  if (!Array.isArray(value) || value.length !== 2 || value.some((v) => typeof v !== "number")) {
    throw new Error(`${what} must be a [x, y] number pair`);
  }
  return [value[0], value[1]];
}

export function parseRequest(raw: unknown): Request {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("request must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  const id = obj.id;
  if (typeof id !== "number" || !Number.isInteger(id)) {
    throw new Error("request id must be an integer");
  }
  const kind = obj.kind;
  if (kind === "saliency") {
    return { kind, id, ref: imageRef(obj) };
  }
  if (kind !== "segment") {
    throw new Error(`unknown request kind ${JSON.stringify(kind)}`);
  }
  const rawPoints = obj.points ?? [];
  if (!Array.isArray(rawPoints)) {
    throw new Error("points must be an array of [x, y] pairs");
  }
  const points = rawPoints.map((p, i) => numberPair(p, `points[${i}]`));
  // An absent or empty labels list means every click is foreground.
  const rawLabels = obj.labels;
  let labels: number[];
  if (rawLabels == null || (Array.isArray(rawLabels) && rawLabels.length === 0)) {
    labels = points.map(() => 1);
  } else if (Array.isArray(rawLabels) && rawLabels.every((v) => typeof v === "number")) {
    labels = rawLabels as number[];
  } else {
    throw new Error("labels must be an array of integers");
  }
  let box: [number, number, number, number] | null = null;
  if (obj.box != null) {
    const b = obj.box;
    if (!Array.isArray(b) || b.length !== 4 || b.some((v) => typeof v !== "number")) {
      throw new Error("box must be [x0, y0, x1, y1]");
    }
    box = [b[0], b[1], b[2], b[3]];
  }
  return {
    kind,
    id,
    ref: imageRef(obj),
    points,
    labels,
    box,
    multimask: Boolean(obj.multimask),
  };
}

export function helloLine(model: string): string {
  return JSON.stringify({ kind: "hello", version: PROTOCOL_VERSION, model });
}

export function segmentResultLine(id: number, maskRle: Rle, score: number): string {
  return JSON.stringify({
    kind: "result",
    id,
    mask_rle: { size: maskRle.size, counts: maskRle.counts },
    score,
  });
}

export function saliencyResultLine(id: number, saliency: SaliencyResult): string {
  return JSON.stringify({
    kind: "result",
    id,
    saliency: { size: saliency.size, values: saliency.values },
  });
}

export function errorLine(id: number | null, message: string): string {
  return JSON.stringify({ kind: "error", id, message });
}
