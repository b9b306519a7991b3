#!/usr/bin/env node
/**
 * make-figures --spec <file.json> [--out <file.svg>]
 *
 * Renders one figure from movingsource CLI artifacts.  The spec file names
 * the figure kind, the artifact directories, and styling options; see
 * FigureSpec in figures.ts.  Exit codes: 0 success, 1 validation/artifact
 * error.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { ArtifactError } from "./artifacts";
import { FigureSpec, render } from "./figures";

function parseArgs(argv: string[]): { spec: string; out?: string } {
  let spec: string | undefined;
  let out: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--spec") spec = argv[++i];
    else if (argv[i] === "--out") out = argv[++i];
    else if (argv[i] === "--help" || argv[i] === "-h") {
      console.log("usage: make-figures --spec <file.json> [--out <file.svg>]");
      process.exit(0);
    } else {
      throw new ArtifactError(`unknown argument '${argv[i]}'`);
    }
  }
  if (!spec) throw new ArtifactError("--spec is required");
  return { spec, out };
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    let text: string;
    try {
      text = readFileSync(args.spec, "utf8");
    } catch (err) {
      throw new ArtifactError(`cannot read spec ${args.spec}: ${(err as Error).message}`);
    }
    const spec = JSON.parse(text) as FigureSpec;
    if (args.out) spec.out = args.out;
    if (!spec.out) throw new ArtifactError("spec needs an 'out' path (or pass --out)");
    const svg = render(spec);
    writeFileSync(spec.out, svg);
    console.log(`wrote ${spec.out}`);
    return 0;
  } catch (err) {
    if (err instanceof ArtifactError || err instanceof SyntaxError) {
      console.error(`error: ${(err as Error).message}`);
      return 1;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
