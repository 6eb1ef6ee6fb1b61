import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { loadModel, ModelFormatError, predictProba } from "../src/model.js";

function writeModel(payload: unknown): string {
  const dir = mkdtempSync(join(tmpdir(), "adapter-model-"));
  const path = join(dir, "model.json");
  writeFileSync(path, JSON.stringify(payload, null, 2) + "\n");
  return path;
}

const LINEAR = {
  kind: "builtin_linear",
  n_classes: 2,
  input_length: 2,
  coef: [
    [0.0, 0.0],
    [1.0, 1.0],
  ],
  bias: [0.0, -1.0],
};

const CENTROID = {
  kind: "builtin_centroid",
  n_classes: 2,
  input_length: 2,
  centroids: [
    [0.0, 0.0],
    [3.0, 4.0],
  ],
};

describe("loadModel", () => {
  it("loads a linear model and ignores extra top-level keys", () => {
    const path = writeModel({ ...LINEAR, tool: { name: "x" }, config: { seed: 0 } });
    const model = loadModel(path);
    expect(model.kind).toBe("builtin_linear");
    expect(model.nClasses).toBe(2);
    expect(model.inputLength).toBe(2);
  });

  it("loads a centroid model", () => {
    const model = loadModel(writeModel(CENTROID));
    expect(model.kind).toBe("builtin_centroid");
  });

  it("rejects a missing file", () => {
    expect(() => loadModel("/no/such/model.json")).toThrow(ModelFormatError);
  });

  it("rejects invalid JSON", () => {
    const dir = mkdtempSync(join(tmpdir(), "adapter-model-"));
    const path = join(dir, "broken.json");
    writeFileSync(path, "{not json");
    expect(() => loadModel(path)).toThrow(/not valid JSON/);
  });

  it("rejects unknown kinds", () => {
    expect(() => loadModel(writeModel({ ...LINEAR, kind: "mystery" }))).toThrow(/unsupported model kind/);
  });

  it("rejects coef shape mismatches", () => {
    expect(() => loadModel(writeModel({ ...LINEAR, coef: [[0.0, 0.0]] }))).toThrow(/coef/);
    expect(() =>
      loadModel(writeModel({ ...LINEAR, coef: [[0.0], [1.0, 1.0]] })),
    ).toThrow(/length/);
  });

  it("rejects non-finite parameters", () => {
    const path = writeModel({ ...LINEAR, bias: [0.0, null] });
    expect(() => loadModel(path)).toThrow(/finite/);
  });

  it("rejects bad n_classes", () => {
    expect(() => loadModel(writeModel({ ...LINEAR, n_classes: 0 }))).toThrow(/n_classes/);
  });
});

describe("predictProba", () => {
  it("matches hand-computed linear probabilities", () => {
    const model = loadModel(writeModel(LINEAR));
    const [row] = predictProba(model, [[2.0, 3.0]]);
    // logits [0, 4] under softmax
    const p1 = 1.0 / (1.0 + Math.exp(-4.0));
    expect(row![0]).toBeCloseTo(1.0 - p1, 12);
    expect(row![1]).toBeCloseTo(p1, 12);
  });

  it("matches hand-computed centroid probabilities", () => {
    const model = loadModel(writeModel(CENTROID));
    const [row] = predictProba(model, [[0.0, 0.0]]);
    // distances [0, 5], so logits [0, -5]
    const p0 = 1.0 / (1.0 + Math.exp(-5.0));
    expect(row![0]).toBeCloseTo(p0, 12);
    expect(row![1]).toBeCloseTo(1.0 - p0, 12);
  });

  it("returns rows that sum to one", () => {
    const model = loadModel(writeModel(LINEAR));
    const batch = [
      [100.0, -50.0],
      [-3.5, 0.25],
      [0.0, 0.0],
    ];
    for (const row of predictProba(model, batch)) {
      const total = row.reduce((a, b) => a + b, 0);
      expect(total).toBeCloseTo(1.0, 12);
      for (const p of row) expect(p).toBeGreaterThanOrEqual(0);
    }
  });

  it("stays finite under extreme logits", () => {
    const model = loadModel(writeModel(LINEAR));
    const [row] = predictProba(model, [[1e8, 1e8]]);
    expect(row!.every(Number.isFinite)).toBe(true);
    expect(row![1]).toBeCloseTo(1.0, 12);
  });
});
