/**
 * Readers for the movingsource CLI's CSV/JSON artifacts.
 *
 * All artifacts are plain text: CSV matrices with a single header line and
 * JSON manifests, so no bindings to the solver are needed here.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

export interface Csv {
  header: string[];
  rows: number[][];
}

export class ArtifactError extends Error {}

export function readCsv(path: string): Csv {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new ArtifactError(`cannot read artifact ${path}: ${(err as Error).message}`);
  }
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new ArtifactError(`artifact ${path} is empty`);
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",").map(Number);
    if (cells.length !== header.length || cells.some((v) => Number.isNaN(v))) {
      throw new ArtifactError(`artifact ${path} has a malformed row ${i + 2}`);
    }
    return cells;
  });
  return { header, rows };
}

export function readJson(path: string): Record<string, unknown> {
  try {
    return JSON.parse(readFileSync(path, "utf8"));
  } catch (err) {
    throw new ArtifactError(`cannot read manifest ${path}: ${(err as Error).message}`);
  }
}

export function column(csv: Csv, name: string): number[] {
  const index = csv.header.indexOf(name);
  if (index < 0) {
    throw new ArtifactError(`missing column '${name}' (have: ${csv.header.join(", ")})`);
  }
  return csv.rows.map((row) => row[index]);
}

/** Sensor positions from a measurement artifact directory. */
export function readSensors(dataDir: string): { x: number[]; y: number[]; z: number[] } {
  const csv = readCsv(join(dataDir, "sensors.csv"));
  return { x: column(csv, "x"), y: column(csv, "y"), z: column(csv, "z") };
}

export interface FieldMatrix {
  times: number[];
  /** one row per sensor */
  values: number[][];
}

export function readField(dataDir: string, which: "clean" | "noisy"): FieldMatrix {
  const csv = readCsv(join(dataDir, `field_${which}.csv`));
  return { times: csv.header.map(Number), values: csv.rows };
}

export interface SourceCurves {
  tau: number[];
  /** per source: trajectory coordinates and intensity on the emission grid */
  sources: { x: number[]; y: number[]; q: number[] }[];
}

/** truth.csv / posterior_mean.csv / posterior_mode.csv all share this layout. */
export function readSourceCurves(path: string): SourceCurves {
  const csv = readCsv(path);
  if (csv.header[0] !== "tau" || (csv.header.length - 1) % 3 !== 0) {
    throw new ArtifactError(`${path} is not a source-model artifact`);
  }
  const nSources = (csv.header.length - 1) / 3;
  const sources = [];
  for (let s = 0; s < nSources; s++) {
    sources.push({
      x: column(csv, `src${s}_x`),
      y: column(csv, `src${s}_y`),
      q: column(csv, `src${s}_q`),
    });
  }
  return { tau: column(csv, "tau"), sources };
}

export interface SampleCurve {
  chain: number;
  step: number;
  source: number;
  /** 0 = x, 1 = y, 2 = q */
  component: number;
  values: number[];
}

export function readSamples(summariesDir: string): SampleCurve[] {
  const csv = readCsv(join(summariesDir, "samples.csv"));
  if (csv.rows.length === 0) {
    throw new ArtifactError(
      `no posterior samples in ${summariesDir}/samples.csv (empty chain?)`
    );
  }
  return csv.rows.map((row) => ({
    chain: row[0],
    step: row[1],
    source: row[2],
    component: row[3],
    values: row.slice(4),
  }));
}

/** Group paired x/y sample rows into planar curves keyed by (chain, step, source). */
export function sampleTrajectories(samples: SampleCurve[]): { x: number[]; y: number[] }[] {
  const xs = new Map<string, number[]>();
  const ys = new Map<string, number[]>();
  for (const s of samples) {
    const key = `${s.chain}/${s.step}/${s.source}`;
    if (s.component === 0) xs.set(key, s.values);
    if (s.component === 1) ys.set(key, s.values);
  }
  const curves: { x: number[]; y: number[] }[] = [];
  for (const [key, x] of xs) {
    const y = ys.get(key);
    if (y) curves.push({ x, y });
  }
  if (curves.length === 0) {
    throw new ArtifactError("samples.csv holds no complete (x, y) trajectory pairs");
  }
  return curves;
}
