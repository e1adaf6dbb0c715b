/**
 * Request loop.
 *
 * One request in flight at a time: lines are consumed from stdin through an
 * async iterator and each is fully answered before the next is read, so a
 * client that pipelines still gets replies in order. Every failure after
 * startup is answered in-protocol (kind "error"); the loop only ends on
 * stdin EOF or a termination signal.
 */

import { createInterface } from "node:readline";

import { EmbeddingCache } from "./cache.js";
import {
  errorLine,
  helloLine,
  parseRequest,
  requestId,
  saliencyResultLine,
  segmentResultLine,
} from "./protocol.js";
import type { SegmentationModel } from "./model.js";

export class AdapterService {
  constructor(
    private model: SegmentationModel,
    private cache: EmbeddingCache = new EmbeddingCache(),
  ) {}

  hello(): string {
    return helloLine(this.model.name);
  }

  /**
   * Answer one raw input line. Returns the reply line without its trailing
   * newline, or null for blank input (which the protocol ignores).
   */
  async handleLine(line: string): Promise<string | null> {
    if (line.trim() === "") {
      return null;
    }
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch (error) {
      const detail = error instanceof Error ? error.message : String(error);
      return errorLine(null, `bad JSON: ${detail}`);
    }
    try {
      const request = parseRequest(raw);
      const embedding = await this.cache.resolve(this.model, request.ref);
      if (request.kind === "segment") {
        const { maskRle, score } = await this.model.segment(embedding, {
          points: request.points,
          labels: request.labels,
          box: request.box,
          multimask: request.multimask,
        });
        return segmentResultLine(request.id, maskRle, score);
      }
      if (this.model.saliency === undefined) {
        throw new Error(`model ${this.model.name} does not provide saliency`);
      }
      return saliencyResultLine(request.id, await this.model.saliency(embedding));
    } catch (error) {
      const detail = error instanceof Error ? error.message : String(error);
      return errorLine(requestId(raw), detail);
    }
  }
}

export async function serve(model: SegmentationModel): Promise<void> {
  const service = new AdapterService(model);
  process.stdout.write(service.hello() + "\n");
  const lines = createInterface({ input: process.stdin, crlfDelay: Infinity });
  for await (const line of lines) {
    const reply = await service.handleLine(line);
    if (reply !== null) {
      process.stdout.write(reply + "\n");
    }
  }
  model.close();
}
