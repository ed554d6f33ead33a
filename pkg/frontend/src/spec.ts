/** FigureSpec schema: what to render, from which exports, into which file. */

import { readFileSync } from "node:fs";

export type FigureKind = "field" | "boxplot" | "vtrace" | "rollout3d";

export interface FigureStyle {
  width?: number;
  height?: number;
  streamlineSeeds?: number;
  contourLevels?: number;
}

export interface FigureSpec {
  kind: FigureKind;
  inputs: Record<string, string | string[]>;
  output: string;
  style?: FigureStyle;
}

const KINDS: FigureKind[] = ["field", "boxplot", "vtrace", "rollout3d"];

const REQUIRED_INPUTS: Record<FigureKind, string[]> = {
  field: ["field_csv", "scene_json"],
  boxplot: ["reports"],
  vtrace: ["vtraces_json"],
  rollout3d: ["rollout_csvs"],
};

export function loadSpec(path: string): FigureSpec {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`${path}: cannot read spec (${(err as Error).message})`);
  }
  const spec = raw as Partial<FigureSpec>;
  if (!spec.kind || !KINDS.includes(spec.kind)) {
    throw new Error(`${path}: 'kind' must be one of ${KINDS.join(", ")}`);
  }
  if (!spec.output || typeof spec.output !== "string") {
    throw new Error(`${path}: 'output' image path is required`);
  }
  if (!spec.inputs || typeof spec.inputs !== "object") {
    throw new Error(`${path}: 'inputs' object is required`);
  }
  for (const key of REQUIRED_INPUTS[spec.kind]) {
    if (!(key in spec.inputs)) {
      throw new Error(`${path}: kind '${spec.kind}' requires inputs.${key}`);
    }
  }
  return spec as FigureSpec;
}

export interface SceneFile {
  format: number;
  name: string;
  dim: number;
  obstacles: Array<{ vertices: number[][] }>;
  goal: number[];
  pos_lower: number[];
  pos_upper: number[];
}

export function loadScene(path: string): SceneFile {
  const scene = JSON.parse(readFileSync(path, "utf-8")) as SceneFile;
  for (const key of ["obstacles", "goal", "pos_lower", "pos_upper"] as const) {
    if (!(key in scene)) {
      throw new Error(`${path}: scene file missing '${key}'`);
    }
  }
  return scene;
}
