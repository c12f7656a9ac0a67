/**
 * Minimal SVG plotting helpers.  No timestamps and no randomness: the
 * output is a pure function of the input data, so regeneration is
 * byte-identical.
 */

export interface Extent {
  min: number;
  max: number;
}

export interface Frame {
  x0: number;
  y0: number;
  width: number;
  height: number;
}

export type Scale = (v: number) => number;

export function extend(values: number[], padFraction = 0.06): Extent {
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (!Number.isFinite(min) || !Number.isFinite(max)) {
    min = 0;
    max = 1;
  }
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const pad = (max - min) * padFraction;
  return { min: min - pad, max: max + pad };
}

export function linearScale(ext: Extent, lo: number, hi: number): Scale {
  const span = ext.max - ext.min;
  return (v) => lo + ((v - ext.min) / span) * (hi - lo);
}

export function logScale(ext: Extent, lo: number, hi: number): Scale {
  const lmin = Math.log10(ext.min);
  const lmax = Math.log10(ext.max);
  return (v) => lo + ((Math.log10(v) - lmin) / (lmax - lmin)) * (hi - lo);
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const FMT = (v: number) => (Math.abs(v) < 1e-12 ? "0" : v.toPrecision(6));

export function polyline(points: Array<[number, number]>, color: string, dash = ""): string {
  const pts = points.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"${dashAttr}/>`;
}

export function circleMarkers(points: Array<[number, number]>, color: string): string {
  return points
    .map(([x, y]) => `<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="2.5" fill="${color}"/>`)
    .join("");
}

export function text(x: number, y: number, content: string, size = 11, anchor = "start"): string {
  return (
    `<text x="${x.toFixed(1)}" y="${y.toFixed(1)}" font-size="${size}" ` +
    `font-family="monospace" text-anchor="${anchor}">${escapeXml(content)}</text>`
  );
}

export function frameBox(f: Frame): string {
  return (
    `<rect x="${f.x0}" y="${f.y0}" width="${f.width}" height="${f.height}" ` +
    `fill="none" stroke="#444" stroke-width="1"/>`
  );
}

/** Ticks for a linear axis: round positions inside the extent. */
export function linearTicks(ext: Extent, count = 5): number[] {
  const span = ext.max - ext.min;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const stepScaled = [1, 2, 5, 10].map((m) => m * step).find((s) => span / s <= count + 1) ?? step;
  const first = Math.ceil(ext.min / stepScaled) * stepScaled;
  const ticks: number[] = [];
  for (let v = first; v <= ext.max + 1e-12; v += stepScaled) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

/** Decade ticks for a log axis. */
export function logTicks(ext: Extent): number[] {
  const lo = Math.floor(Math.log10(ext.min));
  const hi = Math.ceil(Math.log10(ext.max));
  const ticks: number[] = [];
  for (let d = lo; d <= hi; d++) {
    const v = Math.pow(10, d);
    if (v >= ext.min && v <= ext.max) {
      ticks.push(v);
    }
  }
  return ticks.length >= 2 ? ticks : [ext.min, ext.max];
}

export function xAxis(f: Frame, ticks: number[], scale: Scale, label: string): string {
  const parts: string[] = [];
  const y = f.y0 + f.height;
  for (const v of ticks) {
    const x = scale(v);
    parts.push(`<line x1="${x.toFixed(2)}" y1="${y}" x2="${x.toFixed(2)}" y2="${y + 4}" stroke="#444"/>`);
    parts.push(text(x, y + 16, FMT(v), 10, "middle"));
  }
  parts.push(text(f.x0 + f.width / 2, y + 32, label, 11, "middle"));
  return parts.join("");
}

export function yAxis(f: Frame, ticks: number[], scale: Scale, label: string): string {
  const parts: string[] = [];
  for (const v of ticks) {
    const y = scale(v);
    parts.push(`<line x1="${f.x0 - 4}" y1="${y.toFixed(2)}" x2="${f.x0}" y2="${y.toFixed(2)}" stroke="#444"/>`);
    parts.push(text(f.x0 - 7, y + 3, FMT(v), 10, "end"));
  }
  parts.push(
    `<text x="${f.x0 - 52}" y="${f.y0 + f.height / 2}" font-size="11" font-family="monospace" ` +
      `text-anchor="middle" transform="rotate(-90 ${f.x0 - 52} ${f.y0 + f.height / 2})">` +
      `${escapeXml(label)}</text>`
  );
  return parts.join("");
}

export function document(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n<rect width="100%" height="100%" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
