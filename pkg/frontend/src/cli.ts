#!/usr/bin/env node
/** plots render --spec spec.json
 *
 * Renders one figure from lyapmotion CLI exports. Output is deterministic
 * SVG: re-rendering the same spec yields byte-identical files.
 */

import { writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { mkdirSync } from "node:fs";

import { renderSpec } from "./figures.js";
import { loadSpec } from "./spec.js";

function usage(): never {
  process.stderr.write("usage: plots render --spec <spec.json>\n");
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv.length < 1 || argv[0] !== "render") {
    usage();
  }
  const specIdx = argv.indexOf("--spec");
  if (specIdx < 0 || specIdx + 1 >= argv.length) {
    usage();
  }
  try {
    const spec = loadSpec(argv[specIdx + 1]);
    const svg = renderSpec(spec);
    mkdirSync(dirname(spec.output), { recursive: true });
    writeFileSync(spec.output, svg);
    process.stdout.write(`wrote ${spec.kind} figure to ${spec.output}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
