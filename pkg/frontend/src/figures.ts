/** The four figure kinds rendered from CLI exports. All output is SVG text. */

import { readFileSync } from "node:fs";

import { parseCsv, requireColumns, column } from "./csv.js";
import { FieldGrid, contourSegments, fieldFromTable, streamline } from "./grid.js";
import { FigureSpec, SceneFile, loadScene } from "./spec.js";
import { Scale, SvgDoc, valueColor } from "./svg.js";

const AXIS = "stroke:#444444;stroke-width:1";
const LABEL = "font-family:sans-serif;font-size:11px;fill:#333333";
const TITLE = "font-family:sans-serif;font-size:13px;fill:#111111";

function finiteValues(grid: FieldGrid): number[] {
  const vals: number[] = [];
  for (const row of grid.value) {
    for (const v of row) {
      if (Number.isFinite(v)) vals.push(v);
    }
  }
  return vals;
}

/** Streamlines over value contours with obstacles and the goal marker. */
export function renderField(spec: FigureSpec): string {
  const path = spec.inputs.field_csv as string;
  const table = parseCsv(readFileSync(path, "utf-8"), path);
  const grid = fieldFromTable(table, path);
  const scene = loadScene(spec.inputs.scene_json as string);
  if (scene.dim !== 2) {
    throw new Error("field figures require a 2D scene");
  }

  const width = spec.style?.width ?? 640;
  const height = spec.style?.height ?? 520;
  const margin = 40;
  const doc = new SvgDoc(width, height);
  const scale = new Scale(
    { x0: scene.pos_lower[0], x1: scene.pos_upper[0], y0: scene.pos_lower[1], y1: scene.pos_upper[1] },
    { x0: margin, x1: width - margin, y0: margin, y1: height - margin },
  );

  // value background as grid cells
  const vals = finiteValues(grid);
  const vmin = Math.min(...vals);
  const vmax = Math.max(...vals);
  for (let i = 0; i < grid.nx - 1; i++) {
    for (let j = 0; j < grid.ny - 1; j++) {
      const v = grid.value[i][j];
      if (!Number.isFinite(v)) continue;
      const t = (v - vmin) / (vmax - vmin || 1);
      const x = scale.x(grid.xs[i]);
      const y = scale.y(grid.ys[j + 1]);
      doc.rect(x, y, scale.x(grid.xs[i + 1]) - x, scale.y(grid.ys[j]) - y,
        `fill:${valueColor(t)}`);
    }
  }

  // contour lines
  const nLevels = spec.style?.contourLevels ?? 12;
  for (let k = 1; k <= nLevels; k++) {
    const level = vmin + ((vmax - vmin) * k) / (nLevels + 1);
    for (const [[xa, ya], [xb, yb]] of contourSegments(grid, level)) {
      doc.line(scale.x(xa), scale.y(ya), scale.x(xb), scale.y(yb),
        "stroke:#7a93b8;stroke-width:0.7;opacity:0.8");
    }
  }

  // streamlines seeded on a coarse lattice
  const seeds = spec.style?.streamlineSeeds ?? 12;
  const stepLen = Math.min(
    scene.pos_upper[0] - scene.pos_lower[0],
    scene.pos_upper[1] - scene.pos_lower[1],
  ) / 150;
  for (let a = 0; a < seeds; a++) {
    for (let b = 0; b < seeds; b++) {
      const sx = scene.pos_lower[0] + ((a + 0.5) / seeds) * (scene.pos_upper[0] - scene.pos_lower[0]);
      const sy = scene.pos_lower[1] + ((b + 0.5) / seeds) * (scene.pos_upper[1] - scene.pos_lower[1]);
      const line = streamline(grid, sx, sy, stepLen, 420);
      if (line.length < 8) continue;
      doc.polyline(line.map(([x, y]) => [scale.x(x), scale.y(y)] as [number, number]),
        "stroke:#7b2d8b;stroke-width:1.1;opacity:0.75");
    }
  }

  // obstacles and goal
  for (const obs of scene.obstacles) {
    doc.polygon(obs.vertices.map(([x, y]) => [scale.x(x), scale.y(y)] as [number, number]),
      "fill:#2b2b2b;opacity:0.9");
  }
  doc.circle(scale.x(scene.goal[0]), scale.y(scene.goal[1]), 5, "fill:#2e8b57");

  frame(doc, margin, width, height, `policy field: ${scene.name}`);
  return doc.render();
}

interface ReportRef {
  label: string;
  path: string;
  series: string;
}

function quantile(sorted: number[], q: number): number {
  const pos = (sorted.length - 1) * q;
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

/** Log-scale boxplot of per-demo unit MSE for each referenced report series. */
export function renderBoxplot(spec: FigureSpec): string {
  const refs = spec.inputs.reports as unknown as ReportRef[];
  if (!Array.isArray(refs) || refs.length === 0) {
    throw new Error("boxplot requires a nonempty inputs.reports array");
  }
  const series: Array<{ label: string; values: number[] }> = [];
  for (const ref of refs) {
    const payload = JSON.parse(readFileSync(ref.path, "utf-8"));
    // dotted paths reach nested reports, e.g. "compare.model"
    let root: unknown = payload;
    for (const key of (ref.series ?? "").split(".").filter((k) => k.length > 0)) {
      root = (root as Record<string, unknown> | undefined)?.[key];
    }
    const table = root as { per_demo_mse?: Array<{ mse_unit: number }> } | undefined;
    if (!table || !Array.isArray(table.per_demo_mse)) {
      throw new Error(`${ref.path}: missing per_demo_mse for series '${ref.series}'`);
    }
    const values = table.per_demo_mse
      .map((r: { mse_unit: number }) => r.mse_unit)
      .filter((v: number) => Number.isFinite(v) && v > 0);
    if (values.length === 0) {
      throw new Error(`${ref.path}: no positive per-demo MSE values in '${ref.series}'`);
    }
    values.sort((a: number, b: number) => a - b);
    series.push({ label: ref.label, values });
  }

  const width = spec.style?.width ?? 420;
  const height = spec.style?.height ?? 460;
  const margin = 56;
  const doc = new SvgDoc(width, height);

  const allLog = series.flatMap((s) => s.values.map(Math.log10));
  const yMin = Math.floor(Math.min(...allLog) - 0.2);
  const yMax = Math.ceil(Math.max(...allLog) + 0.2);
  const scale = new Scale(
    { x0: 0, x1: series.length, y0: yMin, y1: yMax },
    { x0: margin, x1: width - margin, y0: margin, y1: height - margin },
  );

  for (let e = yMin; e <= yMax; e++) {
    const y = scale.y(e);
    doc.line(margin, y, width - margin, y, "stroke:#dddddd;stroke-width:1");
    doc.text(8, y + 4, `1e${e}`, LABEL);
  }

  series.forEach((s, i) => {
    const cx = scale.x(i + 0.5);
    const boxW = Math.min(60, (width - 2 * margin) / (series.length * 2));
    const logs = s.values.map(Math.log10);
    const q1 = quantile(logs, 0.25);
    const q2 = quantile(logs, 0.5);
    const q3 = quantile(logs, 0.75);
    const lo = logs[0];
    const hi = logs[logs.length - 1];
    doc.line(cx, scale.y(lo), cx, scale.y(q1), AXIS);
    doc.line(cx, scale.y(q3), cx, scale.y(hi), AXIS);
    doc.line(cx - boxW / 2, scale.y(lo), cx + boxW / 2, scale.y(lo), AXIS);
    doc.line(cx - boxW / 2, scale.y(hi), cx + boxW / 2, scale.y(hi), AXIS);
    doc.rect(cx - boxW, scale.y(q3), 2 * boxW, scale.y(q1) - scale.y(q3),
      "fill:#9ecae1;stroke:#444444;stroke-width:1");
    doc.line(cx - boxW, scale.y(q2), cx + boxW, scale.y(q2), "stroke:#b22222;stroke-width:1.6");
    doc.text(cx - 4 * s.label.length, height - margin + 18, s.label, LABEL);
  });

  doc.text(margin, 24, "unit-vector MSE (log scale)", TITLE);
  frame(doc, margin, width, height, "");
  return doc.render();
}

/** Normalized Lyapunov traces against the step index. */
export function renderVtrace(spec: FigureSpec): string {
  const path = spec.inputs.vtraces_json as string;
  const payload = JSON.parse(readFileSync(path, "utf-8"));
  if (!Array.isArray(payload.traces)) {
    throw new Error(`${path}: missing 'traces' array`);
  }
  const traces: number[][] = payload.traces.map((t: { trace: number[] }) => t.trace);
  if (traces.length === 0) {
    throw new Error(`${path}: no traces to plot`);
  }

  const width = spec.style?.width ?? 560;
  const height = spec.style?.height ?? 420;
  const margin = 48;
  const doc = new SvgDoc(width, height);
  const maxLen = Math.max(...traces.map((t) => t.length));
  const maxVal = Math.max(1.0, ...traces.flat());
  const scale = new Scale(
    { x0: 0, x1: Math.max(1, maxLen - 1), y0: 0, y1: maxVal },
    { x0: margin, x1: width - margin, y0: margin, y1: height - margin },
  );

  for (const frac of [0, 0.25, 0.5, 0.75, 1.0]) {
    const y = scale.y(frac * maxVal);
    doc.line(margin, y, width - margin, y, "stroke:#eeeeee;stroke-width:1");
    doc.text(6, y + 4, (frac * maxVal).toFixed(2), LABEL);
  }
  for (const t of traces) {
    doc.polyline(t.map((v, i) => [scale.x(i), scale.y(v)] as [number, number]),
      "stroke:#1f77b4;stroke-width:1;opacity:0.55");
  }
  doc.text(margin, 24, "V(x_n) / V(x_0) per rollout", TITLE);
  doc.text(width / 2 - 14, height - 12, "step n", LABEL);
  frame(doc, margin, width, height, "");
  return doc.render();
}

/** Orthographic projection of 3D rollout trajectories (x-z and y-z panes). */
export function renderRollout3d(spec: FigureSpec): string {
  const paths = spec.inputs.rollout_csvs as string[];
  if (!Array.isArray(paths) || paths.length === 0) {
    throw new Error("rollout3d requires a nonempty inputs.rollout_csvs array");
  }
  const trajs: Array<Array<[number, number, number]>> = [];
  for (const p of paths) {
    const table = parseCsv(readFileSync(p, "utf-8"), p);
    const idx = requireColumns(table, ["x0", "x1", "x2"], p);
    const x = column(table, idx, "x0");
    const y = column(table, idx, "x1");
    const z = column(table, idx, "x2");
    trajs.push(x.map((v, i) => [v, y[i], z[i]] as [number, number, number]));
  }

  const width = spec.style?.width ?? 720;
  const height = spec.style?.height ?? 400;
  const margin = 44;
  const doc = new SvgDoc(width, height);
  const all = trajs.flat();
  const lo = [0, 1, 2].map((k) => Math.min(...all.map((p) => p[k])));
  const hi = [0, 1, 2].map((k) => Math.max(...all.map((p) => p[k])));
  const paneW = (width - 3 * margin) / 2;

  const panes: Array<{ ix: number; iy: number; x0: number; label: string }> = [
    { ix: 0, iy: 2, x0: margin, label: "x-z" },
    { ix: 1, iy: 2, x0: 2 * margin + paneW, label: "y-z" },
  ];
  for (const pane of panes) {
    const scale = new Scale(
      { x0: lo[pane.ix], x1: hi[pane.ix] || 1, y0: lo[pane.iy], y1: hi[pane.iy] || 1 },
      { x0: pane.x0, x1: pane.x0 + paneW, y0: margin, y1: height - margin },
    );
    doc.rect(pane.x0, margin, paneW, height - 2 * margin, "fill:none;stroke:#888888");
    for (const t of trajs) {
      doc.polyline(t.map((p) => [scale.x(p[pane.ix]), scale.y(p[pane.iy])] as [number, number]),
        "stroke:#d62728;stroke-width:1;opacity:0.6");
      const last = t[t.length - 1];
      doc.circle(scale.x(last[pane.ix]), scale.y(last[pane.iy]), 3, "fill:#ff8c00");
    }
    doc.text(pane.x0 + paneW / 2 - 10, height - margin + 18, pane.label, LABEL);
  }
  doc.text(margin, 24, "rollout trajectories (orthographic)", TITLE);
  return doc.render();
}

function frame(doc: SvgDoc, margin: number, width: number, height: number, title: string): void {
  doc.rect(margin, margin, width - 2 * margin, height - 2 * margin, "fill:none;stroke:#666666");
  if (title) {
    doc.text(margin, 24, title, TITLE);
  }
}

export function renderSpec(spec: FigureSpec): string {
  switch (spec.kind) {
    case "field":
      return renderField(spec);
    case "boxplot":
      return renderBoxplot(spec);
    case "vtrace":
      return renderVtrace(spec);
    case "rollout3d":
      return renderRollout3d(spec);
  }
}
