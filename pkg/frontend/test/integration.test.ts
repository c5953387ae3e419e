/** End-to-end: render all three plot families from real simulator outputs
 * produced by the spdecontrol CLI, and check the sidecars reproduce the
 * source CSV values exactly.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, statSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { column, nodeColumns, readCsv } from "../src/csv.js";
import { renderConvergence, renderHeatmap, renderProfileComparison } from "../src/render.js";

const CONFIG = `
preset: heat_tracking
sim:
  steps: 40
optim:
  iterations: 12
  rollouts: 32
  eval_rollouts: 16
mpc:
  steps: 10
  inner_iterations: 2
  rollouts: 16
`;

let work: string;
let optA: string;
let optB: string;
let mpcDir: string;

beforeAll(() => {
  work = mkdtempSync(join(tmpdir(), "figures-e2e-"));
  const config = join(work, "config.yaml");
  writeFileSync(config, CONFIG);
  optA = join(work, "opt_a");
  optB = join(work, "opt_b");
  mpcDir = join(work, "mpc");
  execFileSync("spdecontrol", ["optimize", "--config", config, "--out-dir", optA, "--seed", "1"]);
  execFileSync("spdecontrol", ["optimize", "--config", config, "--out-dir", optB, "--seed", "2"]);
  execFileSync("spdecontrol", ["mpc", "--config", config, "--out-dir", mpcDir, "--seed", "3"]);
}, 120000);

describe("figures from simulator outputs", () => {
  it("heatmap from the applied closed-loop trajectory", () => {
    const input = join(mpcDir, "applied_trajectory.csv");
    const out = renderHeatmap(input, work, { a: 0, b: 1 });
    expect(statSync(out.imagePath).size).toBeGreaterThan(0);
    const sidecar = JSON.parse(readFileSync(out.sidecarPath, "utf-8"));
    const table = readCsv(input);
    expect(sidecar.t).toEqual(column(table, "t"));
    expect(sidecar.values).toEqual(nodeColumns(table).values);
  });

  it("profile comparison from two evaluation batches", () => {
    const out = renderProfileComparison(
      {
        label: "run A",
        meanPath: join(optA, "eval_mean_profile.csv"),
        stdPath: join(optA, "eval_std_profile.csv"),
      },
      {
        label: "run B",
        meanPath: join(optB, "eval_mean_profile.csv"),
        stdPath: join(optB, "eval_std_profile.csv"),
      },
      [
        { lo: 0.18, hi: 0.22, target: 5 },
        { lo: 0.48, hi: 0.52, target: 2.5 },
        { lo: 0.78, hi: 0.82, target: 5 },
      ],
      work,
      { a: 0, b: 1 },
    );
    expect(statSync(out.imagePath).size).toBeGreaterThan(0);
    const sidecar = JSON.parse(readFileSync(out.sidecarPath, "utf-8"));
    for (const [label, dir] of [
      ["run A", optA],
      ["run B", optB],
    ] as const) {
      const series = sidecar.series.find((s: { label: string }) => s.label === label);
      expect(series.mean).toEqual(
        nodeColumns(readCsv(join(dir, "eval_mean_profile.csv"))).values[0],
      );
      expect(series.std).toEqual(
        nodeColumns(readCsv(join(dir, "eval_std_profile.csv"))).values[0],
      );
    }
  });

  it("convergence curve from the optimization history", () => {
    const input = join(optA, "cost_history.csv");
    const out = renderConvergence(input, work);
    expect(statSync(out.imagePath).size).toBeGreaterThan(0);
    const sidecar = JSON.parse(readFileSync(out.sidecarPath, "utf-8"));
    const table = readCsv(input);
    expect(sidecar.mean_J).toEqual(column(table, "mean_J"));
    expect(sidecar.mean_J_tilde).toEqual(column(table, "mean_J_tilde"));
    expect(sidecar.iteration).toEqual(column(table, "iteration"));
  });
});
