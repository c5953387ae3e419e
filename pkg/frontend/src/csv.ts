/** Strict reader for the simulator's CSV outputs (header row + float rows). */

import { readFileSync } from "node:fs";

export interface CsvTable {
  header: string[];
  rows: number[][];
}

export function readCsv(path: string): CsvTable {
  const text = readFileSync(path, "utf-8");
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length < 2) {
    throw new Error(`${path}: need a header row and at least one data row`);
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new Error(`${path}: row ${i + 1} has ${cells.length} cells, header has ${header.length}`);
    }
    return cells.map((cell, j) => {
      const value = Number(cell);
      if (!Number.isFinite(value)) {
        throw new Error(`${path}: row ${i + 1}, column ${header[j]}: not a finite number`);
      }
      return value;
    });
  });
  return { header, rows };
}

export function column(table: CsvTable, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new Error(`missing column: ${name} (have ${table.header.join(", ")})`);
  }
  return table.rows.map((row) => row[idx]);
}

/** Columns whose names look like grid nodes (x_0..x_J), in index order. */
export function nodeColumns(table: CsvTable): { names: string[]; values: number[][] } {
  const names = table.header.filter((name) => /^x_\d+$/.test(name));
  if (names.length === 0) {
    throw new Error(`no x_k node columns found (have ${table.header.join(", ")})`);
  }
  names.sort((a, b) => Number(a.slice(2)) - Number(b.slice(2)));
  const indices = names.map((name) => table.header.indexOf(name));
  const values = table.rows.map((row) => indices.map((i) => row[i]));
  return { names, values };
}
