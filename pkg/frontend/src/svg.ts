/**
 * Minimal deterministic SVG assembly: fixed number formatting, attribute
 * order as written, no timestamps or generator metadata, so identical
 * inputs give byte-identical files.
 */

export function fmt(x: number): string {
  if (!Number.isFinite(x)) throw new Error(`non-finite coordinate ${x}`);
  if (x === 0) return "0";
  const s = x.toFixed(3);
  return s.replace(/\.?0+$/, "") === "-0" ? "0" : s.replace(/\.?0+$/, "");
}

export type Attrs = Record<string, string | number>;

export function el(tag: string, attrs: Attrs, children: string[] = [],
                   text?: string): string {
  const body = attrs
    ? Object.entries(attrs)
        .map(([k, v]) => ` ${k}="${typeof v === "number" ? fmt(v) : v}"`)
        .join("")
    : "";
  if (children.length === 0 && text === undefined) {
    return `<${tag}${body}/>`;
  }
  const inner = text !== undefined ? escapeText(text) : children.join("");
  return `<${tag}${body}>${inner}</${tag}>`;
}

export function escapeText(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function polyline(points: Array<[number, number]>): string {
  return points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
}

export function pathFrom(points: Array<[number, number]>,
                         close = false): string {
  if (points.length === 0) return "";
  const head = `M${fmt(points[0][0])},${fmt(points[0][1])}`;
  const rest = points.slice(1).map(([x, y]) => `L${fmt(x)},${fmt(y)}`).join("");
  return head + rest + (close ? "Z" : "");
}

export function document(width: number, height: number,
                         children: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `font-family="Helvetica, Arial, sans-serif">`,
    ...children,
    "</svg>",
    "",
  ].join("\n");
}

export const PALETTE = {
  truth: "#1a1a1a",
  model: "#d62728",
  band: "#9ecae1",
  mean: "#1f77b4",
  grid: "#dddddd",
  axis: "#444444",
};
