/** The three plot families: heatmap, profile comparison, convergence.
 *
 * Every render writes the image plus a JSON sidecar holding the exact
 * arrays that were plotted, so correctness is testable without image
 * diffing. Output bytes are a pure function of the input files.
 */

import { writeFileSync } from "node:fs";
import { basename, join } from "node:path";

import { CsvTable, column, nodeColumns, readCsv } from "./csv.js";
import {
  axes,
  bandPath,
  document as svgDocument,
  extent,
  fmt,
  makeFrame,
  polyline,
  sequentialColor,
} from "./svg.js";

export interface Window {
  lo: number;
  hi: number;
  target: number;
}

export interface Domain {
  a: number;
  b: number;
}

const OPEN_LOOP_COLOR = "#c0392b"; // red family per the published figures
const MPC_COLOR = "#2e5fa3"; // blue family

function writeSidecar(imagePath: string, payload: unknown): string {
  const sidecarPath = imagePath.replace(/\.svg$/, "") + ".data.json";
  writeFileSync(sidecarPath, JSON.stringify(payload, null, 1) + "\n");
  return sidecarPath;
}

function nodePositions(count: number, domain: Domain): number[] {
  const dx = (domain.b - domain.a) / (count - 1);
  return Array.from({ length: count }, (_, k) => domain.a + k * dx);
}

export interface RenderResult {
  imagePath: string;
  sidecarPath: string;
}

/** Space-time heatmap of a trajectory CSV (rows t, x_0..x_J). */
export function renderHeatmap(
  inputPath: string,
  outDir: string,
  domain: Domain,
  name?: string,
): RenderResult {
  const table = readCsv(inputPath);
  const times = column(table, "t");
  const { values } = nodeColumns(table);
  const xs = nodePositions(values[0].length, domain);

  const frame = makeFrame(extent(xs), extent(times));
  const flat = values.flat();
  const vExtent = extent(flat);
  const span = vExtent.max - vExtent.min;

  const x0 = frame.margin.left;
  const x1 = frame.width - frame.margin.right;
  const y0 = frame.height - frame.margin.bottom;
  const y1 = frame.margin.top;
  const cellW = (x1 - x0) / values[0].length;
  const cellH = (y0 - y1) / values.length;
  for (let row = 0; row < values.length; row++) {
    const py = y0 - (row + 1) * cellH;
    const cells: string[] = [];
    for (let k = 0; k < values[row].length; k++) {
      const t = (values[row][k] - vExtent.min) / span;
      cells.push(
        `<rect x="${fmt(x0 + k * cellW)}" y="${fmt(py)}" width="${fmt(cellW + 0.05)}" height="${fmt(cellH + 0.05)}" fill="${sequentialColor(t)}"/>`,
      );
    }
    frame.parts.push(cells.join(""));
  }
  frame.parts.push(axes(frame, "x", "t [s]", `state evolution (${basename(inputPath)})`));

  const imagePath = join(outDir, (name ?? "heatmap") + ".svg");
  writeFileSync(imagePath, svgDocument(frame));
  const sidecarPath = writeSidecar(imagePath, {
    kind: "heatmap",
    input: inputPath,
    t: times,
    x: xs,
    values,
    value_range: [vExtent.min, vExtent.max],
  });
  return { imagePath, sidecarPath };
}

export interface ProfileSource {
  label: string;
  meanPath: string;
  stdPath: string;
}

function singleRow(table: CsvTable, path: string): number[] {
  const { values } = nodeColumns(table);
  if (values.length !== 1) {
    throw new Error(`${path}: expected a single profile row, found ${values.length}`);
  }
  return values[0];
}

/** Mean +- 1 sigma profiles for two controllers plus target bars. */
export function renderProfileComparison(
  a: ProfileSource,
  b: ProfileSource,
  windows: Window[],
  outDir: string,
  domain: Domain,
  name?: string,
): RenderResult {
  const series = [a, b].map((src) => {
    const mean = singleRow(readCsv(src.meanPath), src.meanPath);
    const std = singleRow(readCsv(src.stdPath), src.stdPath);
    if (mean.length !== std.length) {
      throw new Error(`${src.label}: mean and std lengths differ`);
    }
    return { label: src.label, mean, std };
  });
  const xs = nodePositions(series[0].mean.length, domain);

  const allValues: number[] = [];
  for (const s of series) {
    s.mean.forEach((m, i) => {
      allValues.push(m - s.std[i], m + s.std[i]);
    });
  }
  for (const w of windows) allValues.push(w.target);
  const frame = makeFrame(extent(xs), extent(allValues));

  const colors = [OPEN_LOOP_COLOR, MPC_COLOR];
  series.forEach((s, i) => {
    const lo = s.mean.map((m, k) => m - s.std[k]);
    const hi = s.mean.map((m, k) => m + s.std[k]);
    frame.parts.push(bandPath(frame, xs, lo, hi, colors[i]));
  });
  series.forEach((s, i) => {
    frame.parts.push(polyline(frame, xs, s.mean, colors[i], 2));
  });
  for (const w of windows) {
    // black target bar across the window
    frame.parts.push(polyline(frame, [w.lo, w.hi], [w.target, w.target], "#000", 3));
  }
  series.forEach((s, i) => {
    const y = frame.margin.top + 16 + 16 * i;
    frame.parts.push(
      `<line x1="${frame.margin.left + 10}" y1="${y}" x2="${frame.margin.left + 34}" y2="${y}" stroke="${colors[i]}" stroke-width="2"/>`,
      `<text x="${frame.margin.left + 40}" y="${y + 4}" font-size="12" fill="#222">${s.label}</text>`,
    );
  });
  frame.parts.push(axes(frame, "x", "state", "mean profile within +-1 sigma"));

  const imagePath = join(outDir, (name ?? "profile_comparison") + ".svg");
  writeFileSync(imagePath, svgDocument(frame));
  const sidecarPath = writeSidecar(imagePath, {
    kind: "profile_comparison",
    inputs: {
      [a.label]: { mean: a.meanPath, std: a.stdPath },
      [b.label]: { mean: b.meanPath, std: b.stdPath },
    },
    x: xs,
    series: series.map((s) => ({ label: s.label, mean: s.mean, std: s.std })),
    windows,
  });
  return { imagePath, sidecarPath };
}

/** Cost-vs-iteration curves from an optimization history CSV. */
export function renderConvergence(
  inputPath: string,
  outDir: string,
  name?: string,
): RenderResult {
  const table = readCsv(inputPath);
  const iterations = column(table, "iteration");
  const meanJ = column(table, "mean_J");
  const meanJTilde = column(table, "mean_J_tilde");

  const frame = makeFrame(extent(iterations), extent([...meanJ, ...meanJTilde]));
  frame.parts.push(polyline(frame, iterations, meanJTilde, "#999", 1.5, "4 3"));
  frame.parts.push(polyline(frame, iterations, meanJ, MPC_COLOR, 2));
  const y = frame.margin.top + 16;
  frame.parts.push(
    `<line x1="${frame.margin.left + 10}" y1="${y}" x2="${frame.margin.left + 34}" y2="${y}" stroke="${MPC_COLOR}" stroke-width="2"/>`,
    `<text x="${frame.margin.left + 40}" y="${y + 4}" font-size="12" fill="#222">mean state cost</text>`,
    `<line x1="${frame.margin.left + 10}" y1="${y + 16}" x2="${frame.margin.left + 34}" y2="${y + 16}" stroke="#999" stroke-width="2" stroke-dasharray="4 3"/>`,
    `<text x="${frame.margin.left + 40}" y="${y + 20}" font-size="12" fill="#222">mean corrected cost</text>`,
  );
  frame.parts.push(axes(frame, "iteration", "cost", "cost per iteration"));

  const imagePath = join(outDir, (name ?? "convergence") + ".svg");
  writeFileSync(imagePath, svgDocument(frame));
  const sidecarPath = writeSidecar(imagePath, {
    kind: "convergence",
    input: inputPath,
    iteration: iterations,
    mean_J: meanJ,
    mean_J_tilde: meanJTilde,
  });
  return { imagePath, sidecarPath };
}
