/**
 * Loaders for the files the benchmark exporter writes.  Every reader
 * validates shape and fails with a message naming the file and the first
 * violated expectation; rendering never repairs inputs.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export class SchemaError extends Error {}

export interface BandRow {
  t: number;
  min: number;
  mean: number;
  max: number;
}

export interface BandSeries {
  metric: string;
  configHash: string;
  rows: BandRow[];
}

export interface OverlaySeries {
  configHash: string;
  times: number[];
  truth: number[][];
  prediction: number[][];
  dim: number;
}

export interface ContourPanel {
  quantity: string;
  hyperplane: string;
  x: number[];
  y: number[];
  xlabel: string;
  ylabel: string;
  true: number[][];
  learned: number[][];
  calibration: number[];
}

export interface ContourDoc {
  configHash: string;
  panels: ContourPanel[];
}

export interface KdePanel {
  time: number;
  component: string;
  true_grid: number[];
  true_density: number[];
  model_grid: number[];
  model_density: number[];
}

export interface KdeDoc {
  configHash: string;
  times: number[];
  components: string[];
  panels: KdePanel[];
}

export interface Manifest {
  configHash: string;
  metric: string;
  problem: string;
  files: string[];
}

function fail(file: string, what: string): never {
  throw new SchemaError(`${file}: ${what}`);
}

function finiteNumber(v: unknown, file: string, what: string): number {
  const x = typeof v === "string" ? Number(v) : (v as number);
  if (typeof x !== "number" || !Number.isFinite(x)) {
    fail(file, `${what} is not a finite number (got ${JSON.stringify(v)})`);
  }
  return x;
}

function numberArray(v: unknown, file: string, what: string): number[] {
  if (!Array.isArray(v) || v.length === 0) {
    fail(file, `${what} must be a nonempty array`);
  }
  return v.map((x, i) => finiteNumber(x, file, `${what}[${i}]`));
}

function numberMatrix(v: unknown, file: string, what: string): number[][] {
  if (!Array.isArray(v) || v.length === 0) {
    fail(file, `${what} must be a nonempty matrix`);
  }
  const rows = v.map((row, i) => numberArray(row, file, `${what}[${i}]`));
  const width = rows[0].length;
  if (rows.some((r) => r.length !== width)) {
    fail(file, `${what} rows differ in length`);
  }
  return rows;
}

/** CSV with an optional leading `# config_hash=...` comment. */
function readCsv(path: string): { hash: string; header: string[]; rows: string[][] } {
  const raw = readFileSync(path, "utf8");
  const lines = raw.split("\n");
  let hash = "unknown";
  let body = raw;
  if (lines[0]?.startsWith("#")) {
    const m = lines[0].match(/config_hash=(\S+)/);
    if (m) hash = m[1];
    body = lines.slice(1).join("\n");
  }
  const parsed = Papa.parse<string[]>(body.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    fail(path, `CSV parse error: ${parsed.errors[0].message}`);
  }
  const [header, ...rows] = parsed.data;
  if (!header) fail(path, "empty CSV");
  return { hash, header, rows };
}

export function loadBand(path: string): BandSeries {
  const { hash, header, rows } = readCsv(path);
  const want = ["t", "min", "mean", "max"];
  if (header.join(",") !== want.join(",")) {
    fail(path, `expected header ${want.join(",")}, got ${header.join(",")}`);
  }
  const metric = path.includes("sliced_w2") ? "sliced_w2" : "mse";
  const out = rows.map((r, i) => {
    if (r.length !== 4) fail(path, `row ${i} has ${r.length} fields`);
    return {
      t: finiteNumber(r[0], path, `row ${i} t`),
      min: finiteNumber(r[1], path, `row ${i} min`),
      mean: finiteNumber(r[2], path, `row ${i} mean`),
      max: finiteNumber(r[3], path, `row ${i} max`),
    };
  });
  return { metric, configHash: hash, rows: out };
}

export function loadOverlay(path: string): OverlaySeries {
  const { hash, header, rows } = readCsv(path);
  if (header[0] !== "t") fail(path, "first column must be t");
  const names = header.slice(1);
  const dim = names.length / 2;
  if (!Number.isInteger(dim) || dim < 1) {
    fail(path, "expected paired true_i/pred_i columns");
  }
  for (let i = 0; i < dim; i++) {
    if (names[i] !== `true_${i}` || names[dim + i] !== `pred_${i}`) {
      fail(path, `unexpected column ${names[i]} at position ${i + 1}`);
    }
  }
  const times: number[] = [];
  const truth: number[][] = [];
  const prediction: number[][] = [];
  rows.forEach((r, i) => {
    if (r.length !== 1 + 2 * dim) fail(path, `row ${i} has ${r.length} fields`);
    times.push(finiteNumber(r[0], path, `row ${i} t`));
    truth.push(r.slice(1, 1 + dim).map((v, j) =>
      finiteNumber(v, path, `row ${i} true_${j}`)));
    prediction.push(r.slice(1 + dim).map((v, j) =>
      finiteNumber(v, path, `row ${i} pred_${j}`)));
  });
  return { configHash: hash, times, truth, prediction, dim };
}

export function loadContours(path: string): ContourDoc {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  if (doc.kind !== "contours") fail(path, `kind must be "contours"`);
  if (!Array.isArray(doc.panels) || doc.panels.length === 0) {
    fail(path, "panels must be a nonempty array");
  }
  const panels = doc.panels.map((p: Record<string, unknown>, i: number) => {
    const x = numberArray(p.x, path, `panels[${i}].x`);
    const y = numberArray(p.y, path, `panels[${i}].y`);
    const truth = numberMatrix(p.true, path, `panels[${i}].true`);
    const learned = numberMatrix(p.learned, path, `panels[${i}].learned`);
    if (truth.length !== x.length || truth[0].length !== y.length) {
      fail(path, `panels[${i}].true is ${truth.length}x${truth[0].length}, ` +
        `grid is ${x.length}x${y.length}`);
    }
    if (learned.length !== truth.length ||
        learned[0].length !== truth[0].length) {
      fail(path, `panels[${i}].learned does not match the grid`);
    }
    return {
      quantity: String(p.quantity ?? `panel ${i}`),
      hyperplane: String(p.hyperplane ?? ""),
      x, y,
      xlabel: String(p.xlabel ?? "x"),
      ylabel: String(p.ylabel ?? "y"),
      true: truth,
      learned,
      calibration: Array.isArray(p.calibration)
        ? numberArray(p.calibration, path, `panels[${i}].calibration`)
        : [1, 0],
    };
  });
  return { configHash: String(doc.config_hash ?? "unknown"), panels };
}

export function loadKde(path: string): KdeDoc {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  if (doc.kind !== "kde") fail(path, `kind must be "kde"`);
  const times = numberArray(doc.times, path, "times");
  if (!Array.isArray(doc.components) || doc.components.length === 0) {
    fail(path, "components must be a nonempty array");
  }
  if (!Array.isArray(doc.panels) || doc.panels.length === 0) {
    fail(path, "panels must be a nonempty array");
  }
  const panels = doc.panels.map((p: Record<string, unknown>, i: number) => {
    const panel: KdePanel = {
      time: finiteNumber(p.time, path, `panels[${i}].time`),
      component: String(p.component ?? ""),
      true_grid: numberArray(p.true_grid, path, `panels[${i}].true_grid`),
      true_density: numberArray(p.true_density, path,
        `panels[${i}].true_density`),
      model_grid: numberArray(p.model_grid, path, `panels[${i}].model_grid`),
      model_density: numberArray(p.model_density, path,
        `panels[${i}].model_density`),
    };
    if (panel.true_grid.length !== panel.true_density.length ||
        panel.model_grid.length !== panel.model_density.length) {
      fail(path, `panels[${i}] grid and density lengths differ`);
    }
    return panel;
  });
  return {
    configHash: String(doc.config_hash ?? "unknown"),
    times,
    components: doc.components.map(String),
    panels,
  };
}

export function loadManifest(path: string): Manifest {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  if (!Array.isArray(doc.files)) fail(path, "files must be an array");
  return {
    configHash: String(doc.config_hash ?? "unknown"),
    metric: String(doc.metric ?? ""),
    problem: String(doc.problem ?? ""),
    files: doc.files.map(String),
  };
}
