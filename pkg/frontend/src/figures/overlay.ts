/** Trajectory overlay: ground truth dashed, learned prediction solid, one
 * small panel per state component. */

import { OverlaySeries } from "../schemas.js";
import { extent, linearScale, tickLabel } from "../scales.js";
import { PALETTE, document as svgDoc, el, pathFrom } from "../svg.js";

const PANEL_W = 260;
const PANEL_H = 170;
const M = { left: 52, right: 12, top: 26, bottom: 34 };
const COLS = 2;

export function renderOverlay(series: OverlaySeries): string {
  const rows = Math.ceil(series.dim / COLS);
  const width = COLS * PANEL_W;
  const height = rows * PANEL_H + 18;
  const children: string[] = [
    el("text", { x: width / 2, y: 14, "text-anchor": "middle",
                 "font-size": 13 }, [],
       "test trajectory: truth (dashed) vs learned (solid)"),
  ];
  for (let c = 0; c < series.dim; c++) {
    const col = c % COLS;
    const row = Math.floor(c / COLS);
    const ox = col * PANEL_W;
    const oy = row * PANEL_H + 18;
    children.push(panel(series, c, ox, oy));
  }
  return svgDoc(width, height, children);
}

function panel(series: OverlaySeries, comp: number, ox: number,
               oy: number): string {
  const truth = series.truth.map((r) => r[comp]);
  const pred = series.prediction.map((r) => r[comp]);
  const x = linearScale(extent(series.times),
    [ox + M.left, ox + PANEL_W - M.right], 4);
  const y = linearScale(extent([...truth, ...pred]),
    [oy + PANEL_H - M.bottom, oy + M.top], 4);

  const parts: string[] = [];
  const [yB, yT] = y.range;
  for (const t of x.ticks()) {
    parts.push(el("text", { x: x(t), y: yB + 14, "text-anchor": "middle",
                            "font-size": 9 }, [], tickLabel(t)));
  }
  for (const t of y.ticks()) {
    parts.push(el("text", { x: x.range[0] - 4, y: y(t) + 3,
                            "text-anchor": "end", "font-size": 9 }, [],
                  tickLabel(t)));
  }
  parts.push(el("rect", { x: x.range[0], y: yT, width: x.range[1] - x.range[0],
                          height: yB - yT, fill: "none", stroke: PALETTE.axis,
                          "stroke-width": 0.8 }));
  parts.push(el("path", {
    d: pathFrom(series.times.map((t, j): [number, number] => [x(t), y(truth[j])])),
    fill: "none", stroke: PALETTE.truth, "stroke-width": 1.2,
    "stroke-dasharray": "5,3",
  }));
  parts.push(el("path", {
    d: pathFrom(series.times.map((t, j): [number, number] => [x(t), y(pred[j])])),
    fill: "none", stroke: PALETTE.model, "stroke-width": 1.1,
  }));
  parts.push(el("text", { x: ox + PANEL_W / 2, y: oy + 14,
                          "text-anchor": "middle", "font-size": 11 }, [],
                `z${comp}`));
  return el("g", {}, parts);
}
