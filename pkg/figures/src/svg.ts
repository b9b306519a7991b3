/**
 * Minimal deterministic SVG scene builder: linear scales, polylines,
 * scatter points, and framed axes with end-tick labels.  No DOM, no
 * randomness, so re-rendering a figure is byte-identical.
 */

export interface Extent {
  min: number;
  max: number;
}

export function extent(values: number[], pad = 0.05): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!Number.isFinite(min) || !Number.isFinite(max)) {
    min = 0;
    max = 1;
  }
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const span = max - min;
  return { min: min - pad * span, max: max + pad * span };
}

export function mergeExtents(a: Extent, b: Extent): Extent {
  return { min: Math.min(a.min, b.min), max: Math.max(a.max, b.max) };
}

export class Scale {
  constructor(
    private readonly domain: Extent,
    private readonly range: [number, number]
  ) {}

  map(v: number): number {
    const t = (v - this.domain.min) / (this.domain.max - this.domain.min);
    return this.range[0] + t * (this.range[1] - this.range[0]);
  }
}

const fmt = (v: number): string => (Math.round(v * 100) / 100).toString();

export class Pane {
  private parts: string[] = [];

  constructor(
    readonly x: Scale,
    readonly y: Scale,
    private readonly box: { left: number; top: number; width: number; height: number }
  ) {}

  polyline(xs: number[], ys: number[], stroke: string, width = 1.2, opacity = 1.0): void {
    const points = xs
      .map((v, i) => `${fmt(this.x.map(v))},${fmt(this.y.map(ys[i]))}`)
      .join(" ");
    this.parts.push(
      `<polyline fill="none" stroke="${stroke}" stroke-width="${width}" ` +
        `stroke-opacity="${opacity}" points="${points}"/>`
    );
  }

  dashed(xs: number[], ys: number[], stroke: string, width = 1.4): void {
    const points = xs
      .map((v, i) => `${fmt(this.x.map(v))},${fmt(this.y.map(ys[i]))}`)
      .join(" ");
    this.parts.push(
      `<polyline fill="none" stroke="${stroke}" stroke-width="${width}" ` +
        `stroke-dasharray="6 3" points="${points}"/>`
    );
  }

  scatter(xs: number[], ys: number[], fill: string, radius = 2.2, cssClass = "point"): void {
    for (let i = 0; i < xs.length; i++) {
      this.parts.push(
        `<circle class="${cssClass}" cx="${fmt(this.x.map(xs[i]))}" ` +
          `cy="${fmt(this.y.map(ys[i]))}" r="${radius}" fill="${fill}"/>`
      );
    }
  }

  frame(xDomain: Extent, yDomain: Extent, xLabel: string, yLabel: string): void {
    const { left, top, width, height } = this.box;
    this.parts.push(
      `<rect x="${left}" y="${top}" width="${width}" height="${height}" ` +
        `fill="none" stroke="#444" stroke-width="1"/>`
    );
    const label = (text: string, x: number, y: number, anchor: string) =>
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="10" fill="#444" ` +
      `text-anchor="${anchor}" font-family="sans-serif">${text}</text>`;
    this.parts.push(label(fmt(xDomain.min), left, top + height + 12, "start"));
    this.parts.push(label(fmt(xDomain.max), left + width, top + height + 12, "end"));
    this.parts.push(label(fmt(yDomain.min), left - 4, top + height, "end"));
    this.parts.push(label(fmt(yDomain.max), left - 4, top + 10, "end"));
    this.parts.push(label(xLabel, left + width / 2, top + height + 24, "middle"));
    this.parts.push(label(yLabel, left - 28, top + height / 2, "middle"));
  }

  title(text: string): void {
    const { left, top, width } = this.box;
    this.parts.push(
      `<text x="${fmt(left + width / 2)}" y="${fmt(top - 6)}" font-size="12" ` +
        `fill="#222" text-anchor="middle" font-family="sans-serif">${text}</text>`
    );
  }

  render(): string {
    return this.parts.join("\n");
  }
}

export function makePane(
  xDomain: Extent,
  yDomain: Extent,
  box: { left: number; top: number; width: number; height: number }
): Pane {
  const x = new Scale(xDomain, [box.left, box.left + box.width]);
  const y = new Scale(yDomain, [box.top + box.height, box.top]);
  return new Pane(x, y, box);
}

export function document(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}

/** Fixed qualitative palette (chain colors). */
export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];
