#!/usr/bin/env node
import { loadModel, ModelFormatError } from "./model.js";
import { serve } from "./protocol.js";

const USAGE = "usage: implet-model-adapter <model.json> [--device <hint>]";

function parseArgs(argv: string[]): { modelPath: string; device: string | null } {
  let modelPath: string | null = null;
  let device: string | null = null;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]!;
    if (arg === "--device") {
      device = argv[++i] ?? null;
      if (device === null) throw new Error("--device requires a value");
    } else if (arg.startsWith("-")) {
      throw new Error(`unknown flag ${arg}`);
    } else if (modelPath === null) {
      modelPath = arg;
    } else {
      throw new Error(`unexpected argument ${arg}`);
    }
  }
  if (modelPath === null) throw new Error("missing model path");
  return { modelPath, device };
}

async function main(): Promise<void> {
  let modelPath: string;
  try {
    // Device hints are accepted for interface compatibility; this
    // implementation is CPU-only and ignores them.
    ({ modelPath } = parseArgs(process.argv.slice(2)));
  } catch (err) {
    process.stderr.write(`implet-model-adapter: ${(err as Error).message}\n${USAGE}\n`);
    process.exit(2);
  }
  let model;
  try {
    model = loadModel(modelPath!);
  } catch (err) {
    const msg = err instanceof ModelFormatError ? err.message : String(err);
    process.stderr.write(`implet-model-adapter: ${msg}\n`);
    process.exit(2);
  }
  await serve(model!, process.stdin, process.stdout);
}

main().catch((err) => {
  process.stderr.write(`implet-model-adapter: internal error: ${String(err)}\n`);
  process.exit(1);
});
