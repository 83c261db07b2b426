import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import {
  SchemaError,
  loadBand,
  loadContours,
  loadKde,
  loadOverlay,
} from "../src/schemas.js";

function tmpFile(name: string, content: string): string {
  const dir = mkdtempSync(join(tmpdir(), "figtest-"));
  const path = join(dir, name);
  writeFileSync(path, content);
  return path;
}

describe("band loader", () => {
  it("reads rows and the config hash", () => {
    const path = tmpFile("mse_vs_time.csv",
      "# config_hash=abc123\nt,min,mean,max\n0.0,1e-5,2e-5,3e-5\n0.1,1e-4,2e-4,3e-4\n");
    const band = loadBand(path);
    expect(band.configHash).toBe("abc123");
    expect(band.rows).toHaveLength(2);
    expect(band.rows[1].mean).toBeCloseTo(2e-4);
    expect(band.metric).toBe("mse");
  });
  it("rejects a wrong header", () => {
    const path = tmpFile("mse_vs_time.csv", "time,lo,mid,hi\n0,1,2,3\n");
    expect(() => loadBand(path)).toThrow(SchemaError);
  });
  it("rejects non-numeric cells", () => {
    const path = tmpFile("mse_vs_time.csv",
      "t,min,mean,max\n0.0,oops,2,3\n");
    expect(() => loadBand(path)).toThrow(/not a finite number/);
  });
});

describe("overlay loader", () => {
  it("splits truth and prediction columns", () => {
    const path = tmpFile("trajectory_overlay.csv",
      "t,true_0,true_1,pred_0,pred_1\n0,1,2,1.1,2.1\n0.5,3,4,3.1,4.1\n");
    const ov = loadOverlay(path);
    expect(ov.dim).toBe(2);
    expect(ov.truth[1]).toEqual([3, 4]);
    expect(ov.prediction[0]).toEqual([1.1, 2.1]);
  });
  it("rejects unpaired columns", () => {
    const path = tmpFile("trajectory_overlay.csv",
      "t,true_0,pred_0,pred_1\n0,1,2,3\n");
    expect(() => loadOverlay(path)).toThrow(SchemaError);
  });
});

describe("contour loader", () => {
  const good = {
    kind: "contours",
    config_hash: "h",
    panels: [{
      quantity: "energy", hyperplane: "S1=2.5", x: [0, 1], y: [0, 1, 2],
      xlabel: "q", ylabel: "p",
      true: [[1, 2, 3], [4, 5, 6]],
      learned: [[1, 2, 3], [4, 5, 6]],
      calibration: [1, 0],
    }],
  };
  it("accepts a consistent document", () => {
    const path = tmpFile("contours.json", JSON.stringify(good));
    const doc = loadContours(path);
    expect(doc.panels[0].true[1][2]).toBe(6);
  });
  it("rejects grid/matrix mismatch", () => {
    const bad = JSON.parse(JSON.stringify(good));
    bad.panels[0].true = [[1, 2], [3, 4]];
    const path = tmpFile("contours.json", JSON.stringify(bad));
    expect(() => loadContours(path)).toThrow(/grid/);
  });
  it("rejects a wrong kind tag", () => {
    const path = tmpFile("contours.json", JSON.stringify({ kind: "nope" }));
    expect(() => loadContours(path)).toThrow(SchemaError);
  });
});

describe("kde loader", () => {
  it("accepts panels and rejects ragged ones", () => {
    const good = {
      kind: "kde", config_hash: "h", times: [0, 1], components: ["q"],
      panels: [{ time: 0, component: "q", true_grid: [0, 1],
                 true_density: [0.5, 0.5], model_grid: [0, 1],
                 model_density: [0.4, 0.6] }],
    };
    const path = tmpFile("kde_panels.json", JSON.stringify(good));
    expect(loadKde(path).panels).toHaveLength(1);
    const bad = JSON.parse(JSON.stringify(good));
    bad.panels[0].true_density = [0.5];
    const badPath = tmpFile("kde_panels.json", JSON.stringify(bad));
    expect(() => loadKde(badPath)).toThrow(/lengths differ/);
  });
});
