/** Linear and log axis scales with deterministic tick placement. */

export interface Scale {
  (value: number): number;
  ticks(): number[];
  domain: [number, number];
  range: [number, number];
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!(lo <= hi)) throw new Error("empty extent");
  if (lo === hi) {
    const pad = lo === 0 ? 1 : Math.abs(lo) * 0.1;
    return [lo - pad, hi + pad];
  }
  return [lo, hi];
}

function niceStep(span: number, target: number): number {
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const m of [1, 2, 5, 10]) {
    if (raw <= m * mag) return m * mag;
  }
  return 10 * mag;
}

export function linearScale(domain: [number, number],
                            range: [number, number],
                            tickCount = 5): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const k = (r1 - r0) / (d1 - d0);
  const fn = ((v: number) => r0 + (v - d0) * k) as Scale;
  fn.domain = domain;
  fn.range = range;
  fn.ticks = () => {
    const step = niceStep(d1 - d0, tickCount);
    const start = Math.ceil(d0 / step) * step;
    const out: number[] = [];
    for (let v = start; v <= d1 + 1e-12 * Math.abs(step); v += step) {
      out.push(Math.abs(v) < 1e-12 * Math.abs(step) ? 0 : v);
    }
    return out;
  };
  return fn;
}

export function logScale(domain: [number, number],
                         range: [number, number]): Scale {
  const [d0, d1] = domain;
  if (d0 <= 0 || d1 <= 0) throw new Error("log scale needs positive domain");
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const [r0, r1] = range;
  const k = (r1 - r0) / (l1 - l0);
  const fn = ((v: number) => r0 + (Math.log10(v) - l0) * k) as Scale;
  fn.domain = domain;
  fn.range = range;
  fn.ticks = () => {
    const out: number[] = [];
    for (let e = Math.ceil(l0); e <= Math.floor(l1); e++) {
      out.push(Math.pow(10, e));
    }
    return out.length > 0 ? out : [d0, d1];
  };
  return fn;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    const e = Math.floor(Math.log10(a));
    const m = v / Math.pow(10, e);
    const mm = Math.round(m * 100) / 100;
    return `${mm}e${e}`;
  }
  return String(Math.round(v * 1e6) / 1e6);
}
