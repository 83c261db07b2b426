/** Side-by-side contour panels: truth as filled level bands with solid
 * isolines, calibrated learned surface as dashed isolines on top. */

import { contours } from "d3-contour";
import { ContourDoc, ContourPanel } from "../schemas.js";
import { linearScale, tickLabel } from "../scales.js";
import { PALETTE, document as svgDoc, el, fmt } from "../svg.js";

const PANEL_W = 330;
const PANEL_H = 330;
const M = { left: 54, right: 16, top: 40, bottom: 44 };
const N_LEVELS = 10;

export function renderContours(doc: ContourDoc): string {
  const width = doc.panels.length * PANEL_W;
  const children = doc.panels.map((p, i) => panel(p, i * PANEL_W, 0));
  return svgDoc(width, PANEL_H, children);
}

function levels(matrix: number[][]): number[] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of matrix) {
    for (const v of row) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  const out: number[] = [];
  for (let i = 1; i <= N_LEVELS; i++) {
    out.push(lo + ((hi - lo) * i) / (N_LEVELS + 1));
  }
  return out;
}

function panel(p: ContourPanel, ox: number, oy: number): string {
  const nx = p.x.length;
  const ny = p.y.length;
  // d3-contour consumes row-major values on an (ny-wide, nx-tall) raster;
  // our matrices are [ix][iy], so flatten with iy fastest along x-rows
  const flat = new Float64Array(nx * ny);
  const flatLearned = new Float64Array(nx * ny);
  for (let iy = 0; iy < ny; iy++) {
    for (let ix = 0; ix < nx; ix++) {
      flat[iy * nx + ix] = p.true[ix][iy];
      flatLearned[iy * nx + ix] = p.learned[ix][iy];
    }
  }
  const thresholds = levels(p.true);
  const gen = contours().size([nx, ny]).thresholds(thresholds);
  const truthPolys = gen(Array.from(flat));
  const learnedPolys = gen(Array.from(flatLearned));

  const x = linearScale([0, nx - 1], [ox + M.left, ox + PANEL_W - M.right], 4);
  const y = linearScale([0, ny - 1], [oy + PANEL_H - M.bottom, oy + M.top], 4);
  const gx = linearScale([p.x[0], p.x[nx - 1]],
    [ox + M.left, ox + PANEL_W - M.right], 4);
  const gy = linearScale([p.y[0], p.y[ny - 1]],
    [oy + PANEL_H - M.bottom, oy + M.top], 4);

  const toPath = (poly: ReturnType<typeof gen>[number]) =>
    poly.coordinates
      .map((rings) =>
        rings
          .map((ring) =>
            "M" + ring.map(([gxv, gyv]) => `${fmt(x(gxv))},${fmt(y(gyv))}`)
              .join("L") + "Z")
          .join(""))
      .join("");

  const parts: string[] = [];
  truthPolys.forEach((poly, i) => {
    const shade = 235 - Math.round((i / truthPolys.length) * 110);
    parts.push(el("path", { d: toPath(poly),
                            fill: `rgb(${shade},${shade + 8},255)`,
                            "fill-opacity": "0.5", stroke: PALETTE.truth,
                            "stroke-width": 0.7 }));
  });
  learnedPolys.forEach((poly) => {
    parts.push(el("path", { d: toPath(poly), fill: "none",
                            stroke: PALETTE.model, "stroke-width": 1,
                            "stroke-dasharray": "4,3" }));
  });
  for (const t of gx.ticks()) {
    parts.push(el("text", { x: gx(t), y: gy.range[0] + 16,
                            "text-anchor": "middle", "font-size": 10 }, [],
                  tickLabel(t)));
  }
  for (const t of gy.ticks()) {
    parts.push(el("text", { x: gx.range[0] - 5, y: gy(t) + 3,
                            "text-anchor": "end", "font-size": 10 }, [],
                  tickLabel(t)));
  }
  parts.push(el("rect", { x: gx.range[0], y: gy.range[1],
                          width: gx.range[1] - gx.range[0],
                          height: gy.range[0] - gy.range[1], fill: "none",
                          stroke: PALETTE.axis, "stroke-width": 1 }));
  parts.push(el("text", { x: ox + PANEL_W / 2, y: oy + 16,
                          "text-anchor": "middle", "font-size": 12 }, [],
                `${p.quantity} on {${p.hyperplane}}`));
  parts.push(el("text", { x: ox + PANEL_W / 2, y: oy + 30,
                          "text-anchor": "middle", "font-size": 10 }, [],
                "truth solid, learned (calibrated) dashed"));
  parts.push(el("text", { x: (gx.range[0] + gx.range[1]) / 2,
                          y: gy.range[0] + 32, "text-anchor": "middle",
                          "font-size": 11 }, [], p.xlabel));
  parts.push(el("text", { x: ox + 14, y: (gy.range[0] + gy.range[1]) / 2,
                          "text-anchor": "middle", "font-size": 11,
                          transform: `rotate(-90 ${ox + 14} ` +
                            `${(gy.range[0] + gy.range[1]) / 2})` }, [],
                p.ylabel));
  return el("g", {}, parts);
}
