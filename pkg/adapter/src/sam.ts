/**
 * Checkpoint-backed model.
 *
 * Inference itself stays in Python (torch and the SAM package live there);
 * this class owns a long-lived worker subprocess and talks to it over a
 * private JSON-lines channel with the same one-in-flight discipline as the
 * outer protocol. The split keeps the encode/decode halves separate so the
 * embedding cache actually saves the expensive half.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import type { Readable, Writable } from "node:stream";
import { unlinkSync, writeFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { createInterface } from "node:readline";
import { fileURLToPath } from "node:url";

import type {
  Embedding,
  ImageRef,
  MaskResult,
  SegmentationModel,
  SegmentPrompt,
} from "./model.js";

export interface AdapterConfig {
  checkpoint: string;
  variant: string;
  device: string;
}

const WORKER_SCRIPT = fileURLToPath(new URL("../py/sam_worker.py", import.meta.url));

/** How long to wait for the worker's ready line before giving up. */
const STARTUP_TIMEOUT_MS = 120_000;

interface WorkerReply {
  ok: boolean;
  id?: number | null;
  error?: string;
  [key: string]: unknown;
}

class WorkerChannel {
  private proc: ChildProcessByStdio<Writable, Readable, null>;
  private lines: AsyncIterator<string>;
  private nextId = 1;

  constructor(args: string[]) {
    // stderr passes through so load failures and torch warnings stay visible.
    this.proc = spawn("python3", [WORKER_SCRIPT, ...args], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const reader = createInterface({ input: this.proc.stdout, crlfDelay: Infinity });
    this.lines = reader[Symbol.asyncIterator]();
  }

  async readReply(timeoutMs?: number): Promise<WorkerReply> {
    let result: IteratorResult<string>;
    if (timeoutMs === undefined) {
      result = await this.lines.next();
    } else {
      let timer: NodeJS.Timeout | undefined;
      const timeout = new Promise<never>((_, reject) => {
        timer = setTimeout(() => reject(new Error("worker timed out")), timeoutMs);
      });
      try {
        result = await Promise.race([this.lines.next(), timeout]);
      } finally {
        clearTimeout(timer);
      }
    }
    if (result.done) {
      throw new Error("inference worker exited unexpectedly");
    }
    return JSON.parse(result.value) as WorkerReply;
  }

  async call(op: string, fields: Record<string, unknown>): Promise<WorkerReply> {
    const id = this.nextId++;
    this.proc.stdin.write(JSON.stringify({ op, id, ...fields }) + "\n");
    const reply = await this.readReply();
    if (!reply.ok) {
      throw new Error(reply.error ?? "worker reported an unspecified error");
    }
    return reply;
  }

  close(): void {
    this.proc.stdin.end();
    this.proc.kill();
  }
}

export class CheckpointModel implements SegmentationModel {
  readonly name: string;

  private constructor(private worker: WorkerChannel, variant: string) {
    this.name = `sam-${variant}`;
  }

  static async load(config: AdapterConfig): Promise<CheckpointModel> {
    const checkpoint = resolve(config.checkpoint);
    if (!existsSync(checkpoint)) {
      throw new Error(`checkpoint not found: ${checkpoint}`);
    }
    const worker = new WorkerChannel([
      "--checkpoint",
      checkpoint,
      "--variant",
      config.variant,
      "--device",
      config.device,
    ]);
    let ready: WorkerReply;
    try {
      ready = await worker.readReply(STARTUP_TIMEOUT_MS);
    } catch (error) {
      worker.close();
      throw error;
    }
    if (!ready.ok) {
      worker.close();
      throw new Error(ready.error ?? "model load failed");
    }
    return new CheckpointModel(worker, config.variant);
  }

  async encode(ref: ImageRef): Promise<Embedding> {
    if ("path" in ref) {
      return this.encodePath(resolve(ref.path));
    }
    // Inline images get spilled to a temp file; the worker only reads paths.
    const temp = join(tmpdir(), `sam-adapter-${process.pid}-${Date.now()}.png`);
    writeFileSync(temp, ref.bytes);
    try {
      return await this.encodePath(temp);
    } finally {
      unlinkSync(temp);
    }
  }

  private async encodePath(path: string): Promise<Embedding> {
    const reply = await this.worker.call("encode", { image_path: path });
    return {
      width: reply.width as number,
      height: reply.height as number,
      handle: reply.embedding as string,
    };
  }

  async segment(embedding: Embedding, prompt: SegmentPrompt): Promise<MaskResult> {
    const reply = await this.worker.call("decode", {
      embedding: embedding.handle,
      points: prompt.points,
      labels: prompt.labels,
      box: prompt.box,
      multimask: prompt.multimask,
    });
    const maskRle = reply.mask_rle as { size: [number, number]; counts: number[] };
    return { maskRle, score: reply.score as number };
  }

  close(): void {
    this.worker.close();
  }
}
