import { describe, expect, it } from "vitest";
import { extent, linearScale, logScale, tickLabel } from "../src/scales.js";
import { fmt, el, pathFrom } from "../src/svg.js";

describe("extent", () => {
  it("finds min and max", () => {
    expect(extent([3, -1, 2])).toEqual([-1, 3]);
  });
  it("pads a degenerate span", () => {
    const [lo, hi] = extent([2, 2]);
    expect(lo).toBeLessThan(2);
    expect(hi).toBeGreaterThan(2);
  });
  it("rejects empty input", () => {
    expect(() => extent([])).toThrow();
  });
});

describe("linearScale", () => {
  it("maps the domain onto the range", () => {
    const s = linearScale([0, 10], [100, 200]);
    expect(s(0)).toBe(100);
    expect(s(10)).toBe(200);
    expect(s(5)).toBe(150);
  });
  it("produces ticks inside the domain at nice steps", () => {
    const s = linearScale([0, 8], [0, 1], 5);
    const ticks = s.ticks();
    expect(ticks[0]).toBeGreaterThanOrEqual(0);
    expect(ticks[ticks.length - 1]).toBeLessThanOrEqual(8);
    expect(ticks).toContain(0);
    expect(ticks.length).toBeGreaterThanOrEqual(3);
  });
});

describe("logScale", () => {
  it("maps decades evenly", () => {
    const s = logScale([1e-4, 1], [0, 4]);
    expect(s(1e-4)).toBeCloseTo(0, 12);
    expect(s(1e-2)).toBeCloseTo(2, 12);
    expect(s(1)).toBeCloseTo(4, 12);
  });
  it("ticks at powers of ten", () => {
    const s = logScale([1e-3, 1e0], [0, 1]);
    expect(s.ticks()).toEqual([1e-3, 1e-2, 1e-1, 1e0]);
  });
  it("rejects nonpositive domains", () => {
    expect(() => logScale([0, 1], [0, 1])).toThrow();
  });
});

describe("tickLabel", () => {
  it("uses plain notation for moderate values", () => {
    expect(tickLabel(0.5)).toBe("0.5");
    expect(tickLabel(0)).toBe("0");
  });
  it("uses exponent notation for extremes", () => {
    expect(tickLabel(1e-6)).toBe("1e-6");
    expect(tickLabel(2e5)).toBe("2e5");
  });
});

describe("svg primitives", () => {
  it("formats numbers deterministically", () => {
    expect(fmt(1.23456)).toBe("1.235");
    expect(fmt(2)).toBe("2");
    expect(fmt(-0.0001)).toBe("0");
  });
  it("rejects non-finite coordinates", () => {
    expect(() => fmt(NaN)).toThrow();
  });
  it("builds elements and paths", () => {
    expect(el("line", { x1: 0, y1: 1.5, x2: 2, y2: 3 }))
      .toBe('<line x1="0" y1="1.5" x2="2" y2="3"/>');
    expect(pathFrom([[0, 0], [1, 2]])).toBe("M0,0L1,2");
    expect(pathFrom([[0, 0], [1, 2]], true)).toBe("M0,0L1,2Z");
  });
  it("escapes text content", () => {
    expect(el("text", {}, [], "a<b")).toBe("<text>a&lt;b</text>");
  });
});
