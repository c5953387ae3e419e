/** Minimal deterministic SVG plotting: fixed styles, no timestamps. */

export interface Extent {
  min: number;
  max: number;
}

export function extent(values: Iterable<number>): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!(min <= max)) throw new Error("extent of empty data");
  if (min === max) {
    // degenerate range: pad so scales stay invertible
    min -= 0.5;
    max += 0.5;
  }
  return { min, max };
}

export class LinearScale {
  constructor(
    readonly domain: Extent,
    readonly range: Extent,
  ) {}

  map(v: number): number {
    const t = (v - this.domain.min) / (this.domain.max - this.domain.min);
    return this.range.min + t * (this.range.max - this.range.min);
  }
}

/** Fixed-point coordinate formatting keeps output bytes stable. */
export function fmt(v: number): string {
  return v.toFixed(2);
}

// Compact blue -> white -> red diverging map for signed fields and a
// dark-to-bright sequential map for nonnegative ones.
function channel(a: number, b: number, t: number): number {
  return Math.round(a + (b - a) * t);
}

export function sequentialColor(t: number): string {
  const u = Math.min(1, Math.max(0, t));
  // dark violet -> orange -> light yellow
  const r = channel(48, 253, u);
  const g = channel(18, 231, u ** 1.35);
  const b = channel(59, 37, u ** 3);
  return `rgb(${r},${g},${b})`;
}

export interface PlotFrame {
  width: number;
  height: number;
  margin: { left: number; right: number; top: number; bottom: number };
  xScale: LinearScale;
  yScale: LinearScale;
  parts: string[];
}

export function makeFrame(
  xDomain: Extent,
  yDomain: Extent,
  width = 720,
  height = 480,
): PlotFrame {
  const margin = { left: 64, right: 24, top: 36, bottom: 48 };
  return {
    width,
    height,
    margin,
    xScale: new LinearScale(xDomain, { min: margin.left, max: width - margin.right }),
    yScale: new LinearScale(yDomain, { min: height - margin.bottom, max: margin.top }),
    parts: [],
  };
}

export function polyline(
  frame: PlotFrame,
  xs: number[],
  ys: number[],
  stroke: string,
  strokeWidth = 1.5,
  dash = "",
): string {
  const pts = xs
    .map((x, i) => `${fmt(frame.xScale.map(x))},${fmt(frame.yScale.map(ys[i]))}`)
    .join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline fill="none" stroke="${stroke}" stroke-width="${strokeWidth}"${dashAttr} points="${pts}"/>`;
}

export function bandPath(
  frame: PlotFrame,
  xs: number[],
  lo: number[],
  hi: number[],
  fill: string,
): string {
  const upper = xs.map((x, i) => `${fmt(frame.xScale.map(x))},${fmt(frame.yScale.map(hi[i]))}`);
  const lower = xs
    .map((x, i) => `${fmt(frame.xScale.map(x))},${fmt(frame.yScale.map(lo[i]))}`)
    .reverse();
  return `<polygon fill="${fill}" fill-opacity="0.25" stroke="none" points="${upper.join(" ")} ${lower.join(" ")}"/>`;
}

function ticks(domain: Extent, count: number): number[] {
  const out: number[] = [];
  for (let i = 0; i <= count; i++) {
    out.push(domain.min + ((domain.max - domain.min) * i) / count);
  }
  return out;
}

export function axes(frame: PlotFrame, xLabel: string, yLabel: string, title: string): string {
  const { width, height, margin, xScale, yScale } = frame;
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = height - margin.bottom;
  const y1 = margin.top;
  const parts = [
    `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#444" stroke-width="1"/>`,
  ];
  for (const t of ticks(xScale.domain, 5)) {
    const px = fmt(xScale.map(t));
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="#444"/>`);
    parts.push(
      `<text x="${px}" y="${y0 + 20}" font-size="11" text-anchor="middle" fill="#222">${t.toPrecision(3)}</text>`,
    );
  }
  for (const t of ticks(yScale.domain, 5)) {
    const py = fmt(yScale.map(t));
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="#444"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${py}" font-size="11" text-anchor="end" dominant-baseline="middle" fill="#222">${t.toPrecision(3)}</text>`,
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${height - 10}" font-size="13" text-anchor="middle" fill="#222">${xLabel}</text>`,
    `<text x="16" y="${(y0 + y1) / 2}" font-size="13" text-anchor="middle" fill="#222" transform="rotate(-90 16 ${(y0 + y1) / 2})">${yLabel}</text>`,
    `<text x="${(x0 + x1) / 2}" y="22" font-size="15" text-anchor="middle" fill="#000">${title}</text>`,
  );
  return parts.join("\n");
}

export function document(frame: PlotFrame): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}">`,
    `<rect width="${frame.width}" height="${frame.height}" fill="white"/>`,
    ...frame.parts,
    `</svg>`,
    ``,
  ].join("\n");
}
