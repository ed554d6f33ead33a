/** Minimal CSV reader for the numeric exports produced by the lyapmotion CLI. */

export interface Table {
  columns: string[];
  rows: number[][];
}

export function parseCsv(text: string, path: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error(`${path}: empty CSV`);
  }
  const columns = lines[0].split(",");
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new Error(`${path}: row ${i} has ${parts.length} fields, expected ${columns.length}`);
    }
    rows.push(parts.map((p) => (p === "" || p === "inf" ? Infinity : Number(p))));
  }
  if (rows.length === 0) {
    throw new Error(`${path}: CSV has a header but no data rows`);
  }
  return { columns, rows };
}

export function requireColumns(table: Table, needed: string[], path: string): Map<string, number> {
  const index = new Map<string, number>();
  for (const name of needed) {
    const i = table.columns.indexOf(name);
    if (i < 0) {
      throw new Error(`${path}: missing required column '${name}' (found: ${table.columns.join(", ")})`);
    }
    index.set(name, i);
  }
  return index;
}

export function column(table: Table, index: Map<string, number>, name: string): number[] {
  const i = index.get(name)!;
  return table.rows.map((r) => r[i]);
}
