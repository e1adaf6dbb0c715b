#!/usr/bin/env node
/**
 * CLI entry point. Serves the wire protocol on stdio: either the weight-free
 * stub (--stub) or a real checkpoint through the Python worker.
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { CheckpointModel } from "./sam.js";
import { serve } from "./server.js";
import { StubModel } from "./stub.js";
import type { SegmentationModel } from "./model.js";

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName("sam-stdio-adapter")
    .option("checkpoint", {
      type: "string",
      describe: "path to a SAM checkpoint (.pth)",
    })
    .option("variant", {
      type: "string",
      default: "vit_h",
      describe: "registry name the checkpoint was trained as",
    })
    .option("device", {
      type: "string",
      default: "cpu",
      describe: "torch device for inference",
    })
    .option("stub", {
      type: "boolean",
      default: false,
      describe: "serve the weight-free stub model (no checkpoint needed)",
    })
    .strict()
    .help()
    .parseAsync();

  let model: SegmentationModel;
  if (argv.stub) {
    model = new StubModel();
  } else {
    if (!argv.checkpoint) {
      throw new Error("--checkpoint is required unless --stub is given");
    }
    model = await CheckpointModel.load({
      checkpoint: argv.checkpoint,
      variant: argv.variant,
      device: argv.device,
    });
  }

  const shutdown = () => {
    model.close();
    process.exit(0);
  };
  process.on("SIGTERM", shutdown);
  process.on("SIGINT", shutdown);

  await serve(model);
}

main().catch((error: unknown) => {
  const message = error instanceof Error ? error.message : String(error);
  process.stderr.write(`sam-stdio-adapter: ${message}\n`);
  process.exit(1);
});
