#!/usr/bin/env node
/**
 * render_figures <export-dir> <out-dir>
 *
 * Reads an exported results directory (band CSV, trajectory overlay CSV,
 * contour JSON, density JSON) and writes one SVG per figure kind found.
 * Rendering is a pure function of the input files.
 */

import { existsSync, mkdirSync, readdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { renderBand } from "./figures/band.js";
import { renderContours } from "./figures/contours.js";
import { renderKde } from "./figures/kde.js";
import { renderOverlay } from "./figures/overlay.js";
import {
  SchemaError,
  loadBand,
  loadContours,
  loadKde,
  loadOverlay,
} from "./schemas.js";

export interface RenderResult {
  written: string[];
}

export function renderAll(exportDir: string, outDir: string): RenderResult {
  if (!existsSync(exportDir)) {
    throw new SchemaError(`export directory not found: ${exportDir}`);
  }
  const entries = readdirSync(exportDir);
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];

  const emit = (name: string, svg: string) => {
    const path = join(outDir, name);
    writeFileSync(path, svg);
    written.push(path);
  };

  for (const name of entries) {
    if (name.endsWith("_vs_time.csv")) {
      const band = loadBand(join(exportDir, name));
      emit(name.replace("_vs_time.csv", "_band.svg"), renderBand(band));
    }
  }
  if (entries.includes("trajectory_overlay.csv")) {
    const overlay = loadOverlay(join(exportDir, "trajectory_overlay.csv"));
    emit("trajectory_overlay.svg", renderOverlay(overlay));
  }
  if (entries.includes("contours.json")) {
    const doc = loadContours(join(exportDir, "contours.json"));
    emit("contours.svg", renderContours(doc));
  }
  if (entries.includes("kde_panels.json")) {
    const doc = loadKde(join(exportDir, "kde_panels.json"));
    emit("kde_panels.svg", renderKde(doc));
  }

  if (written.length === 0) {
    throw new SchemaError(
      `no renderable inputs in ${exportDir} (expected *_vs_time.csv, ` +
      `trajectory_overlay.csv, contours.json or kde_panels.json)`);
  }
  return { written };
}

function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: render_figures <export-dir> <out-dir>");
    return 2;
  }
  try {
    const { written } = renderAll(argv[0], argv[1]);
    for (const path of written) console.log(`wrote ${path}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 3;
    }
    throw err;
  }
}

const isCli = process.argv[1]?.endsWith("render.js");
if (isCli) {
  process.exit(main(process.argv.slice(2)));
}
