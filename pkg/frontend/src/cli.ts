/** Command-line entry: heatmap | profile | convergence.
 *
 * Usage:
 *   figures heatmap --input traj.csv --out-dir figs [--domain 0:1] [--name heat]
 *   figures profile --label-a openloop --mean-a m.csv --std-a s.csv \
 *                   --label-b mpc --mean-b m2.csv --std-b s2.csv \
 *                   --window 0.18:0.22:5 [--window ...] --out-dir figs [--domain 0:1]
 *   figures convergence --input cost_history.csv --out-dir figs
 */

import { mkdirSync } from "node:fs";

import { renderConvergence, renderHeatmap, renderProfileComparison, Window } from "./render.js";

interface Parsed {
  command: string;
  single: Map<string, string>;
  repeated: Map<string, string[]>;
}

const REPEATABLE = new Set(["--window"]);

function parseArgs(argv: string[]): Parsed {
  if (argv.length === 0 || argv[0].startsWith("--")) {
    throw new Error("usage: figures <heatmap|profile|convergence> [options]");
  }
  const parsed: Parsed = { command: argv[0], single: new Map(), repeated: new Map() };
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new Error(`malformed option near '${key}'`);
    }
    if (REPEATABLE.has(key)) {
      const list = parsed.repeated.get(key) ?? [];
      list.push(value);
      parsed.repeated.set(key, list);
    } else {
      if (parsed.single.has(key)) throw new Error(`duplicate option ${key}`);
      parsed.single.set(key, value);
    }
  }
  return parsed;
}

function need(parsed: Parsed, key: string): string {
  const value = parsed.single.get(key);
  if (value === undefined) throw new Error(`missing required option ${key}`);
  return value;
}

function parseDomain(parsed: Parsed): { a: number; b: number } {
  const raw = parsed.single.get("--domain") ?? "0:1";
  const [a, b] = raw.split(":").map(Number);
  if (!Number.isFinite(a) || !Number.isFinite(b) || b <= a) {
    throw new Error(`bad --domain '${raw}', expected a:b with b > a`);
  }
  return { a, b };
}

function parseWindows(parsed: Parsed): Window[] {
  return (parsed.repeated.get("--window") ?? []).map((raw) => {
    const [lo, hi, target] = raw.split(":").map(Number);
    if (![lo, hi, target].every(Number.isFinite) || hi < lo) {
      throw new Error(`bad --window '${raw}', expected lo:hi:target`);
    }
    return { lo, hi, target };
  });
}

export function main(argv: string[]): number {
  let parsed: Parsed;
  try {
    parsed = parseArgs(argv);
    const outDir = need(parsed, "--out-dir");
    mkdirSync(outDir, { recursive: true });
    const name = parsed.single.get("--name");

    let result;
    switch (parsed.command) {
      case "heatmap":
        result = renderHeatmap(need(parsed, "--input"), outDir, parseDomain(parsed), name);
        break;
      case "profile":
        result = renderProfileComparison(
          {
            label: parsed.single.get("--label-a") ?? "open-loop",
            meanPath: need(parsed, "--mean-a"),
            stdPath: need(parsed, "--std-a"),
          },
          {
            label: parsed.single.get("--label-b") ?? "mpc",
            meanPath: need(parsed, "--mean-b"),
            stdPath: need(parsed, "--std-b"),
          },
          parseWindows(parsed),
          outDir,
          parseDomain(parsed),
          name,
        );
        break;
      case "convergence":
        result = renderConvergence(need(parsed, "--input"), outDir, name);
        break;
      default:
        throw new Error(`unknown command '${parsed.command}'`);
    }
    console.log(`${result.imagePath}\n${result.sidecarPath}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
