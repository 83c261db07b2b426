/** Density comparison panels: rows are state components, columns are the
 * requested times; true density solid, model density dashed. */

import { KdeDoc, KdePanel } from "../schemas.js";
import { extent, linearScale, tickLabel } from "../scales.js";
import { PALETTE, document as svgDoc, el, pathFrom } from "../svg.js";

const PANEL_W = 220;
const PANEL_H = 160;
const M = { left: 44, right: 10, top: 24, bottom: 30 };

export function renderKde(doc: KdeDoc): string {
  const times = doc.times.filter((t) =>
    doc.panels.some((p) => p.time === t));
  const comps = doc.components.filter((c) =>
    doc.panels.some((p) => p.component === c));
  const width = times.length * PANEL_W;
  const height = comps.length * PANEL_H + 20;
  const children: string[] = [
    el("text", { x: width / 2, y: 14, "text-anchor": "middle",
                 "font-size": 13 }, [],
       "state distribution: truth (solid) vs learned (dashed)"),
  ];
  comps.forEach((comp, r) => {
    times.forEach((t, c) => {
      const panel = doc.panels.find(
        (p) => p.component === comp && p.time === t);
      if (panel) {
        children.push(drawPanel(panel, c * PANEL_W, r * PANEL_H + 20));
      }
    });
  });
  return svgDoc(width, height, children);
}

function drawPanel(p: KdePanel, ox: number, oy: number): string {
  const xs = extent([...p.true_grid, ...p.model_grid]);
  const ys: [number, number] =
    [0, Math.max(...p.true_density, ...p.model_density) * 1.08];
  const x = linearScale(xs, [ox + M.left, ox + PANEL_W - M.right], 4);
  const y = linearScale(ys, [oy + PANEL_H - M.bottom, oy + M.top], 3);

  const parts: string[] = [];
  for (const t of x.ticks()) {
    parts.push(el("text", { x: x(t), y: y.range[0] + 13,
                            "text-anchor": "middle", "font-size": 8.5 }, [],
                  tickLabel(t)));
  }
  for (const t of y.ticks()) {
    parts.push(el("text", { x: x.range[0] - 4, y: y(t) + 3,
                            "text-anchor": "end", "font-size": 8.5 }, [],
                  tickLabel(t)));
  }
  parts.push(el("rect", { x: x.range[0], y: y.range[1],
                          width: x.range[1] - x.range[0],
                          height: y.range[0] - y.range[1], fill: "none",
                          stroke: PALETTE.axis, "stroke-width": 0.8 }));
  parts.push(el("path", {
    d: pathFrom(p.true_grid.map(
      (g, i): [number, number] => [x(g), y(p.true_density[i])])),
    fill: "none", stroke: PALETTE.truth, "stroke-width": 1.2,
  }));
  parts.push(el("path", {
    d: pathFrom(p.model_grid.map(
      (g, i): [number, number] => [x(g), y(p.model_density[i])])),
    fill: "none", stroke: PALETTE.model, "stroke-width": 1.1,
    "stroke-dasharray": "4,3",
  }));
  parts.push(el("text", { x: ox + PANEL_W / 2, y: oy + 12,
                          "text-anchor": "middle", "font-size": 10 }, [],
                `${p.component} at t=${p.time}`));
  return el("g", {}, parts);
}
