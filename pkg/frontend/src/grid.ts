/** Regular-grid field reconstruction from the CLI field export. */

import { Table, column, requireColumns } from "./csv.js";

export interface FieldGrid {
  xs: number[]; // sorted unique axis values
  ys: number[];
  nx: number;
  ny: number;
  value: number[][]; // [ix][iy]
  vx: number[][];
  vy: number[][];
}

function uniqueSorted(values: number[]): number[] {
  const out = Array.from(new Set(values));
  out.sort((a, b) => a - b);
  return out;
}

export function fieldFromTable(table: Table, path: string): FieldGrid {
  const idx = requireColumns(table, ["x", "y", "vx_modulated", "vy_modulated", "V"], path);
  const xcol = column(table, idx, "x");
  const ycol = column(table, idx, "y");
  const xs = uniqueSorted(xcol);
  const ys = uniqueSorted(ycol);
  if (xs.length * ys.length !== table.rows.length) {
    throw new Error(`${path}: rows do not form a full ${xs.length}x${ys.length} grid`);
  }
  const xi = new Map(xs.map((v, i) => [v, i]));
  const yi = new Map(ys.map((v, i) => [v, i]));
  const make = () => xs.map(() => new Array<number>(ys.length).fill(NaN));
  const value = make();
  const vx = make();
  const vy = make();
  const vcol = column(table, idx, "V");
  const vxcol = column(table, idx, "vx_modulated");
  const vycol = column(table, idx, "vy_modulated");
  for (let r = 0; r < table.rows.length; r++) {
    const i = xi.get(xcol[r])!;
    const j = yi.get(ycol[r])!;
    value[i][j] = vcol[r];
    vx[i][j] = vxcol[r];
    vy[i][j] = vycol[r];
  }
  return { xs, ys, nx: xs.length, ny: ys.length, value, vx, vy };
}

/** Bilinear interpolation of the velocity field; zero outside the grid. */
export function sampleVelocity(grid: FieldGrid, x: number, y: number): [number, number] {
  const { xs, ys } = grid;
  if (x < xs[0] || x > xs[xs.length - 1] || y < ys[0] || y > ys[ys.length - 1]) {
    return [0, 0];
  }
  let i = xs.findIndex((v) => v > x) - 1;
  if (i < 0) i = x <= xs[0] ? 0 : xs.length - 2;
  let j = ys.findIndex((v) => v > y) - 1;
  if (j < 0) j = y <= ys[0] ? 0 : ys.length - 2;
  i = Math.min(Math.max(i, 0), xs.length - 2);
  j = Math.min(Math.max(j, 0), ys.length - 2);
  const tx = (x - xs[i]) / (xs[i + 1] - xs[i]);
  const ty = (y - ys[j]) / (ys[j + 1] - ys[j]);
  const lerp2 = (f: number[][]): number => {
    const a = f[i][j] * (1 - tx) + f[i + 1][j] * tx;
    const b = f[i][j + 1] * (1 - tx) + f[i + 1][j + 1] * tx;
    return a * (1 - ty) + b * ty;
  };
  return [lerp2(grid.vx), lerp2(grid.vy)];
}

/** Midpoint-rule streamline through the velocity field from a seed point. */
export function streamline(
  grid: FieldGrid,
  seedX: number,
  seedY: number,
  step: number,
  maxPoints: number,
): Array<[number, number]> {
  const pts: Array<[number, number]> = [[seedX, seedY]];
  let x = seedX;
  let y = seedY;
  for (let k = 0; k < maxPoints; k++) {
    const [vx0, vy0] = sampleVelocity(grid, x, y);
    const n0 = Math.hypot(vx0, vy0);
    if (n0 < 1e-9) break;
    const mx = x + (0.5 * step * vx0) / n0;
    const my = y + (0.5 * step * vy0) / n0;
    const [vx1, vy1] = sampleVelocity(grid, mx, my);
    const n1 = Math.hypot(vx1, vy1);
    if (n1 < 1e-9) break;
    x += (step * vx1) / n1;
    y += (step * vy1) / n1;
    pts.push([x, y]);
  }
  return pts;
}

/** Marching-squares iso-contours of the value grid. Returns line segments. */
export function contourSegments(
  grid: FieldGrid,
  level: number,
): Array<[[number, number], [number, number]]> {
  const segs: Array<[[number, number], [number, number]]> = [];
  const { xs, ys, value } = grid;

  const interp = (
    xa: number,
    ya: number,
    va: number,
    xb: number,
    yb: number,
    vb: number,
  ): [number, number] => {
    const t = va === vb ? 0.5 : (level - va) / (vb - va);
    return [xa + t * (xb - xa), ya + t * (yb - ya)];
  };

  for (let i = 0; i < xs.length - 1; i++) {
    for (let j = 0; j < ys.length - 1; j++) {
      const corners = [
        { x: xs[i], y: ys[j], v: value[i][j] },
        { x: xs[i + 1], y: ys[j], v: value[i + 1][j] },
        { x: xs[i + 1], y: ys[j + 1], v: value[i + 1][j + 1] },
        { x: xs[i], y: ys[j + 1], v: value[i][j + 1] },
      ];
      if (corners.some((c) => !Number.isFinite(c.v))) continue;
      let mask = 0;
      corners.forEach((c, k) => {
        if (c.v > level) mask |= 1 << k;
      });
      if (mask === 0 || mask === 15) continue;
      const crossings: Array<[number, number]> = [];
      for (let k = 0; k < 4; k++) {
        const a = corners[k];
        const b = corners[(k + 1) % 4];
        if (a.v > level !== b.v > level) {
          crossings.push(interp(a.x, a.y, a.v, b.x, b.y, b.v));
        }
      }
      for (let k = 0; k + 1 < crossings.length; k += 2) {
        segs.push([crossings[k], crossings[k + 1]]);
      }
    }
  }
  return segs;
}
