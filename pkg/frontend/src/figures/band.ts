/** Metric-versus-time figure: mean line with a min/max shaded band on a
 * logarithmic vertical axis. */

import { BandSeries } from "../schemas.js";
import { extent, linearScale, logScale, tickLabel } from "../scales.js";
import { PALETTE, document as svgDoc, el, pathFrom } from "../svg.js";

const W = 560;
const H = 360;
const M = { left: 70, right: 20, top: 36, bottom: 46 };

export function renderBand(series: BandSeries): string {
  const rows = series.rows;
  const positive = rows.flatMap((r) => [r.min, r.mean, r.max])
    .filter((v) => v > 0);
  const floor = positive.length > 0 ? Math.min(...positive) : 1e-12;
  const clip = (v: number) => Math.max(v, floor * 0.5);

  const x = linearScale(extent(rows.map((r) => r.t)),
    [M.left, W - M.right], 6);
  const top = Math.max(...rows.map((r) => clip(r.max)), floor);
  const y = logScale([floor * 0.5, top], [H - M.bottom, M.top]);

  const bandPts: Array<[number, number]> = [
    ...rows.map((r): [number, number] => [x(r.t), y(clip(r.max))]),
    ...rows.slice().reverse().map(
      (r): [number, number] => [x(r.t), y(clip(r.min))]),
  ];
  const meanPts = rows.map(
    (r): [number, number] => [x(r.t), y(clip(r.mean))]);

  const children = [
    axes(x, y, "t", series.metric === "mse"
      ? "test MSE" : "squared sliced W2"),
    el("path", { d: pathFrom(bandPts, true), fill: PALETTE.band,
                 "fill-opacity": "0.55", stroke: "none" }),
    el("path", { d: pathFrom(meanPts), fill: "none", stroke: PALETTE.mean,
                 "stroke-width": 1.6 }),
    el("text", { x: W / 2, y: 20, "text-anchor": "middle",
                 "font-size": 13 }, [],
       `${series.metric} over time (mean with min/max band)`),
  ];
  return svgDoc(W, H, children);
}

export function axes(x: ReturnType<typeof linearScale>,
                     y: ReturnType<typeof logScale>,
                     xlabel: string, ylabel: string): string {
  const parts: string[] = [];
  const [x0, x1] = x.range;
  const [yBottom, yTop] = y.range;
  for (const t of x.ticks()) {
    parts.push(el("line", { x1: x(t), y1: yBottom, x2: x(t), y2: yTop,
                            stroke: PALETTE.grid, "stroke-width": 0.6 }));
    parts.push(el("text", { x: x(t), y: yBottom + 16, "text-anchor": "middle",
                            "font-size": 10 }, [], tickLabel(t)));
  }
  for (const t of y.ticks()) {
    parts.push(el("line", { x1: x0, y1: y(t), x2: x1, y2: y(t),
                            stroke: PALETTE.grid, "stroke-width": 0.6 }));
    parts.push(el("text", { x: x0 - 6, y: y(t) + 3, "text-anchor": "end",
                            "font-size": 10 }, [], tickLabel(t)));
  }
  parts.push(el("rect", { x: x0, y: yTop, width: x1 - x0,
                          height: yBottom - yTop, fill: "none",
                          stroke: PALETTE.axis, "stroke-width": 1 }));
  parts.push(el("text", { x: (x0 + x1) / 2, y: yBottom + 34,
                          "text-anchor": "middle", "font-size": 12 }, [],
                xlabel));
  parts.push(el("text", { x: 16, y: (yTop + yBottom) / 2,
                          "text-anchor": "middle", "font-size": 12,
                          transform: `rotate(-90 16 ${(yTop + yBottom) / 2})` },
                [], ylabel));
  return el("g", {}, parts);
}
