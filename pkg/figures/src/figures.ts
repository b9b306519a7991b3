/**
 * The five figure kinds rendered from movingsource artifacts:
 * sensor layouts (top view), measured wavefields, trajectory and intensity
 * sample fans with posterior mean/mode overlays, and noise-sweep grids.
 */

import { existsSync } from "node:fs";
import { join } from "node:path";

import {
  ArtifactError,
  readField,
  readSamples,
  readSensors,
  readSourceCurves,
  sampleTrajectories,
  SourceCurves,
} from "./artifacts";
import { document, extent, Extent, makePane, mergeExtents, Pane, PALETTE } from "./svg";

export type FigureKind =
  | "sensors"
  | "wavefield"
  | "trajectory-fan"
  | "intensity-fan"
  | "noise-grid";

export interface RunRef {
  label?: string;
  summaries: string;
  data?: string;
}

export interface FigureSpec {
  kind: FigureKind;
  /** measurement artifact directory (sensors, wavefield, truth overlays) */
  data?: string;
  /** reconstruction artifact directory (fans) */
  summaries?: string;
  /** noise-grid rows */
  runs?: RunRef[];
  out: string;
  maxCurves?: number;
  width?: number;
  height?: number;
  field?: "clean" | "noisy";
  title?: string;
}

const MARGIN = { left: 56, right: 16, top: 28, bottom: 40 };

function box(width: number, height: number) {
  return {
    left: MARGIN.left,
    top: MARGIN.top,
    width: width - MARGIN.left - MARGIN.right,
    height: height - MARGIN.top - MARGIN.bottom,
  };
}

function need(spec: FigureSpec, key: "data" | "summaries"): string {
  const value = spec[key];
  if (!value) {
    throw new ArtifactError(`figure kind '${spec.kind}' needs '${key}' in the spec`);
  }
  return value;
}

function thin<T>(items: T[], cap: number): T[] {
  if (items.length <= cap) return items;
  const out: T[] = [];
  for (let i = 0; i < cap; i++) {
    out.push(items[Math.floor((i * (items.length - 1)) / Math.max(cap - 1, 1))]);
  }
  return out;
}

function truthCurves(spec: FigureSpec): SourceCurves | null {
  if (!spec.data) return null;
  const path = join(spec.data, "truth.csv");
  return existsSync(path) ? readSourceCurves(path) : null;
}

// -------------------------------------------------------------------------
// individual figure kinds
// -------------------------------------------------------------------------

export function renderSensors(spec: FigureSpec): string {
  const width = spec.width ?? 480;
  const height = spec.height ?? 480;
  const sensors = readSensors(need(spec, "data"));
  const truth = truthCurves(spec);
  let xDomain = extent(sensors.x);
  let yDomain = extent(sensors.y);
  if (truth) {
    for (const src of truth.sources) {
      xDomain = mergeExtents(xDomain, extent(src.x));
      yDomain = mergeExtents(yDomain, extent(src.y));
    }
  }
  const pane = makePane(xDomain, yDomain, box(width, height));
  pane.frame(xDomain, yDomain, "x", "y");
  pane.title(spec.title ?? `sensor layout (${sensors.x.length} sensors, top view)`);
  pane.scatter(sensors.x, sensors.y, "#1f77b4", 2.2, "sensor");
  if (truth) {
    for (const src of truth.sources) {
      pane.polyline(src.x, src.y, "#000", 1.6);
    }
  }
  return document(width, height, pane.render());
}

export function renderWavefield(spec: FigureSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const which = spec.field ?? "clean";
  const field = readField(need(spec, "data"), which);
  const cap = spec.maxCurves ?? 60;
  const rows = thin(field.values, cap);
  const xDomain = extent(field.times, 0.0);
  const yDomain = extent(rows.flat());
  const pane = makePane(xDomain, yDomain, box(width, height));
  pane.frame(xDomain, yDomain, "t", "u");
  pane.title(spec.title ?? `measured wave field (${which}, ${rows.length} of ${field.values.length} sensors)`);
  for (const row of rows) {
    pane.polyline(field.times, row, "#1f77b4", 0.8, 0.35);
  }
  return document(width, height, pane.render());
}

export function renderTrajectoryFan(spec: FigureSpec): string {
  const width = spec.width ?? 520;
  const height = spec.height ?? 520;
  const summaries = need(spec, "summaries");
  const curves = thin(sampleTrajectories(readSamples(summaries)), spec.maxCurves ?? 50);
  const mean = readSourceCurves(join(summaries, "posterior_mean.csv"));
  const modePath = join(summaries, "posterior_mode.csv");
  const mode = existsSync(modePath) ? readSourceCurves(modePath) : null;
  const truth = truthCurves(spec);

  let xDomain = extent(curves.flatMap((c) => c.x));
  let yDomain = extent(curves.flatMap((c) => c.y));
  for (const set of [mean, mode, truth]) {
    if (!set) continue;
    for (const src of set.sources) {
      xDomain = mergeExtents(xDomain, extent(src.x));
      yDomain = mergeExtents(yDomain, extent(src.y));
    }
  }
  const pane = makePane(xDomain, yDomain, box(width, height));
  pane.frame(xDomain, yDomain, "x", "y");
  pane.title(spec.title ?? `posterior trajectory samples (${curves.length} shown)`);
  for (const curve of curves) {
    pane.polyline(curve.x, curve.y, "#999999", 0.7, 0.45);
  }
  if (truth) for (const src of truth.sources) pane.polyline(src.x, src.y, "#000", 1.8);
  mean.sources.forEach((src, i) => pane.polyline(src.x, src.y, PALETTE[i % PALETTE.length], 2.0));
  mode?.sources.forEach((src, i) => pane.dashed(src.x, src.y, PALETTE[i % PALETTE.length]));
  return document(width, height, pane.render());
}

export function renderIntensityFan(spec: FigureSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const summaries = need(spec, "summaries");
  const samples = readSamples(summaries).filter((s) => s.component === 2);
  if (samples.length === 0) {
    throw new ArtifactError("samples.csv holds no intensity rows");
  }
  const curves = thin(samples, spec.maxCurves ?? 50);
  const mean = readSourceCurves(join(summaries, "posterior_mean.csv"));
  const modePath = join(summaries, "posterior_mode.csv");
  const mode = existsSync(modePath) ? readSourceCurves(modePath) : null;
  const truth = truthCurves(spec);
  const tau = mean.tau;

  const xDomain = extent(tau, 0.0);
  let yDomain = extent(curves.flatMap((c) => c.values));
  for (const set of [mean, mode, truth]) {
    if (!set) continue;
    for (const src of set.sources) yDomain = mergeExtents(yDomain, extent(src.q));
  }
  const pane = makePane(xDomain, yDomain, box(width, height));
  pane.frame(xDomain, yDomain, "t", "q");
  pane.title(spec.title ?? `posterior intensity samples (${curves.length} shown)`);
  for (const curve of curves) {
    pane.polyline(tau, curve.values, "#999999", 0.7, 0.45);
  }
  if (truth) for (const src of truth.sources) pane.polyline(truth.tau, src.q, "#000", 1.8);
  mean.sources.forEach((src, i) => pane.polyline(tau, src.q, PALETTE[i % PALETTE.length], 2.0));
  mode?.sources.forEach((src, i) => pane.dashed(tau, src.q, PALETTE[i % PALETTE.length]));
  return document(width, height, pane.render());
}

export function renderNoiseGrid(spec: FigureSpec): string {
  const runs = spec.runs ?? [];
  if (runs.length === 0) {
    throw new ArtifactError("noise-grid needs a non-empty 'runs' list");
  }
  const panelW = spec.width ?? 900;
  const rowH = spec.height ?? 300;
  const halfW = panelW / 2;
  const parts: string[] = [];
  runs.forEach((run, i) => {
    const offset = i * rowH;
    const trajPane = fanPaneInto(run, spec, {
      left: MARGIN.left,
      top: MARGIN.top + offset,
      width: halfW - MARGIN.left - MARGIN.right,
      height: rowH - MARGIN.top - MARGIN.bottom,
    });
    const intPane = intensityPaneInto(run, spec, {
      left: halfW + MARGIN.left,
      top: MARGIN.top + offset,
      width: halfW - MARGIN.left - MARGIN.right,
      height: rowH - MARGIN.top - MARGIN.bottom,
    });
    parts.push(trajPane, intPane);
  });
  return document(panelW, rowH * runs.length, parts.join("\n"));
}

function fanPaneInto(
  run: RunRef,
  spec: FigureSpec,
  paneBox: { left: number; top: number; width: number; height: number }
): string {
  const curves = thin(sampleTrajectories(readSamples(run.summaries)), spec.maxCurves ?? 30);
  const mean = readSourceCurves(join(run.summaries, "posterior_mean.csv"));
  const truth = run.data ? truthCurves({ ...spec, data: run.data }) : null;
  let xDomain = extent(curves.flatMap((c) => c.x));
  let yDomain = extent(curves.flatMap((c) => c.y));
  for (const set of [mean, truth]) {
    if (!set) continue;
    for (const src of set.sources) {
      xDomain = mergeExtents(xDomain, extent(src.x));
      yDomain = mergeExtents(yDomain, extent(src.y));
    }
  }
  const pane = makePane(xDomain, yDomain, paneBox);
  pane.frame(xDomain, yDomain, "x", "y");
  pane.title(`${run.label ?? run.summaries}: trajectory`);
  for (const curve of curves) pane.polyline(curve.x, curve.y, "#999999", 0.7, 0.45);
  if (truth) for (const src of truth.sources) pane.polyline(src.x, src.y, "#000", 1.6);
  mean.sources.forEach((src, i) => pane.polyline(src.x, src.y, PALETTE[i % PALETTE.length], 1.8));
  return pane.render();
}

function intensityPaneInto(
  run: RunRef,
  spec: FigureSpec,
  paneBox: { left: number; top: number; width: number; height: number }
): string {
  const samples = readSamples(run.summaries).filter((s) => s.component === 2);
  const curves = thin(samples, spec.maxCurves ?? 30);
  const mean = readSourceCurves(join(run.summaries, "posterior_mean.csv"));
  const truth = run.data ? truthCurves({ ...spec, data: run.data }) : null;
  const tau = mean.tau;
  const xDomain = extent(tau, 0.0);
  let yDomain = extent(curves.flatMap((c) => c.values));
  for (const set of [mean, truth]) {
    if (!set) continue;
    for (const src of set.sources) yDomain = mergeExtents(yDomain, extent(src.q));
  }
  const pane = makePane(xDomain, yDomain, paneBox);
  pane.frame(xDomain, yDomain, "t", "q");
  pane.title(`${run.label ?? run.summaries}: intensity`);
  for (const curve of curves) pane.polyline(tau, curve.values, "#999999", 0.7, 0.45);
  if (truth) for (const src of truth.sources) pane.polyline(truth.tau, src.q, "#000", 1.6);
  mean.sources.forEach((src, i) => pane.polyline(tau, src.q, PALETTE[i % PALETTE.length], 1.8));
  return pane.render();
}

const RENDERERS: Record<FigureKind, (spec: FigureSpec) => string> = {
  sensors: renderSensors,
  wavefield: renderWavefield,
  "trajectory-fan": renderTrajectoryFan,
  "intensity-fan": renderIntensityFan,
  "noise-grid": renderNoiseGrid,
};

export function render(spec: FigureSpec): string {
  const renderer = RENDERERS[spec.kind];
  if (!renderer) {
    throw new ArtifactError(
      `unknown figure kind '${spec.kind}' (known: ${Object.keys(RENDERERS).join(", ")})`
    );
  }
  return renderer(spec);
}
