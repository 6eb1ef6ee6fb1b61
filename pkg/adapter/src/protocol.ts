import * as readline from "node:readline";
import { Model, predictProba } from "./model.js";

export type Response = Record<string, unknown>;

const MAX_ECHO = 200;

function clip(line: string): string {
  return line.length <= MAX_ECHO ? line : line.slice(0, MAX_ECHO) + "...";
}

// The id is echoed even on errors so the caller can re-associate replies.
function extractId(req: unknown): number | null {
  if (typeof req === "object" && req !== null && !Array.isArray(req)) {
    const id = (req as Record<string, unknown>)["id"];
    if (typeof id === "number" && Number.isFinite(id)) return id;
  }
  return null;
}

function validateSeries(raw: unknown, inputLength: number): number[][] {
  if (!Array.isArray(raw) || raw.length === 0) {
    throw new Error("series must be a non-empty array of rows");
  }
  return raw.map((row, i) => {
    if (!Array.isArray(row) || !row.every((v) => typeof v === "number" && Number.isFinite(v))) {
      throw new Error(`series row ${i} must be an array of finite numbers`);
    }
    if (row.length !== inputLength) {
      throw new Error(`series row ${i} has length ${row.length}, expected ${inputLength}`);
    }
    return row as number[];
  });
}

/**
 * Answer a single request line.
 *
 * Always returns a response object; protocol faults (bad JSON, unknown
 * ops, shape mismatches) become {"id", "error"} replies so one broken
 * request never kills the session.
 */
export function handleLine(model: Model, line: string): Response {
  let req: unknown;
  try {
    req = JSON.parse(line);
  } catch {
    return { id: null, error: `malformed request line: ${clip(line)}` };
  }
  const id = extractId(req);
  if (typeof req !== "object" || req === null || Array.isArray(req)) {
    return { id, error: `request must be a JSON object, got: ${clip(line)}` };
  }
  const op = (req as Record<string, unknown>)["op"];
  if (op === "info") {
    return { id, n_classes: model.nClasses, input_length: model.inputLength };
  }
  if (op === "predict_proba") {
    let series: number[][];
    try {
      series = validateSeries((req as Record<string, unknown>)["series"], model.inputLength);
    } catch (err) {
      return { id, error: (err as Error).message };
    }
    return { id, proba: predictProba(model, series) };
  }
  return { id, error: `unknown op ${JSON.stringify(op)}` };
}

/** Serve requests line by line until the input stream closes. */
export function serve(
  model: Model,
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
): Promise<void> {
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  rl.on("line", (line) => {
    output.write(JSON.stringify(handleLine(model, line)) + "\n");
  });
  return new Promise((resolve) => rl.once("close", resolve));
}
