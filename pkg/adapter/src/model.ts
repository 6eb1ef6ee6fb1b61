import { readFileSync } from "node:fs";

/** Raised when a model file is missing, unparseable, or fails validation. */
export class ModelFormatError extends Error {}

export interface LinearModel {
  kind: "builtin_linear";
  nClasses: number;
  inputLength: number;
  /** Row k holds the per-timestep weights for class k. */
  coef: number[][];
  bias: number[];
}

export interface CentroidModel {
  kind: "builtin_centroid";
  nClasses: number;
  inputLength: number;
  /** Row k is the reference series for class k. */
  centroids: number[][];
}

export type Model = LinearModel | CentroidModel;

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function asVector(v: unknown, what: string, length?: number): number[] {
  if (!Array.isArray(v) || !v.every(isFiniteNumber)) {
    throw new ModelFormatError(`${what} must be an array of finite numbers`);
  }
  if (length !== undefined && v.length !== length) {
    throw new ModelFormatError(`${what} has length ${v.length}, expected ${length}`);
  }
  return v as number[];
}

// Rectangular rows x cols matrix of finite floats.
function asMatrix(v: unknown, what: string, rows: number, cols: number): number[][] {
  if (!Array.isArray(v) || v.length !== rows) {
    throw new ModelFormatError(`${what} must have ${rows} rows`);
  }
  return v.map((row, i) => asVector(row, `${what} row ${i}`, cols));
}

function requirePositiveInt(v: unknown, what: string): number {
  if (!isFiniteNumber(v) || !Number.isInteger(v) || v < 1) {
    throw new ModelFormatError(`${what} must be a positive integer, got ${JSON.stringify(v)}`);
  }
  return v;
}

/**
 * Load and validate a saved classifier file.
 *
 * The file is a JSON object carrying "kind", "n_classes", "input_length"
 * and the kind-specific parameter arrays.  Extra top-level keys (tool
 * stamps, embedded configs) are ignored.
 */
export function loadModel(path: string): Model {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new ModelFormatError(`cannot read model file ${path}: ${(err as Error).message}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new ModelFormatError(`model file ${path} is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ModelFormatError(`model file ${path} must hold a JSON object`);
  }
  const obj = raw as Record<string, unknown>;
  const kind = obj["kind"];
  const nClasses = requirePositiveInt(obj["n_classes"], "n_classes");
  const inputLength = requirePositiveInt(obj["input_length"], "input_length");
  if (kind === "builtin_linear") {
    return {
      kind,
      nClasses,
      inputLength,
      coef: asMatrix(obj["coef"], "coef", nClasses, inputLength),
      bias: asVector(obj["bias"], "bias", nClasses),
    };
  }
  if (kind === "builtin_centroid") {
    return {
      kind,
      nClasses,
      inputLength,
      centroids: asMatrix(obj["centroids"], "centroids", nClasses, inputLength),
    };
  }
  throw new ModelFormatError(`unsupported model kind ${JSON.stringify(kind)}`);
}

function softmaxRow(logits: number[]): number[] {
  let top = -Infinity;
  for (const v of logits) {
    if (v > top) top = v;
  }
  const expd = logits.map((v) => Math.exp(v - top));
  let total = 0;
  for (const v of expd) total += v;
  return expd.map((v) => v / total);
}

function logitsFor(model: Model, series: number[]): number[] {
  if (model.kind === "builtin_linear") {
    return model.coef.map((row, k) => {
      let acc = 0;
      for (let t = 0; t < row.length; t++) acc += series[t]! * row[t]!;
      return acc + model.bias[k]!;
    });
  }
  // Centroid head: closer reference series means higher probability.
  return model.centroids.map((row) => {
    let acc = 0;
    for (let t = 0; t < row.length; t++) {
      const d = series[t]! - row[t]!;
      acc += d * d;
    }
    return -Math.sqrt(acc);
  });
}

/**
 * Class probabilities for a batch of univariate series.
 *
 * Each row of the result sums to 1.  Lengths must match the model's
 * input_length; callers are expected to validate shapes first.
 */
export function predictProba(model: Model, series: number[][]): number[][] {
  return series.map((row) => softmaxRow(logitsFor(model, row)));
}
