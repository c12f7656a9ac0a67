/**
 * Convergence-in-N figure: log-log plot of the particle/photon trace
 * distances and the beta parts against N at a fixed sample time, with the
 * fitted slope of the particle trace distance annotated.
 */

import { Row, SchemaError, distinctSorted, parseRows, rowsAtTime } from "./csv.js";
import { logLogSlope, toSigFigs } from "./fit.js";
import * as svg from "./svg.js";

export class RefusedError extends Error {}

interface Series {
  label: string;
  pick: (r: Row) => number;
  color: string;
  dash?: string;
}

const SERIES: Series[] = [
  { label: "tr_dist_particle", pick: (r) => r.trDistParticle, color: svg.PALETTE[0] },
  { label: "tr_dist_photon", pick: (r) => r.trDistPhoton, color: svg.PALETTE[1] },
  { label: "beta_a", pick: (r) => r.betaA, color: svg.PALETTE[2], dash: "4 3" },
  { label: "beta_b", pick: (r) => r.betaB, color: svg.PALETTE[3], dash: "4 3" },
  { label: "beta_c", pick: (r) => r.betaC, color: svg.PALETTE[4], dash: "4 3" },
];

export interface ConvergenceResult {
  svg: string;
  slope: number;
  particleNumbers: number[];
}

export function renderConvergence(csvTexts: string[], tStar: number): ConvergenceResult {
  const rows = csvTexts.flatMap((text) => parseRows(text));
  const at = rowsAtTime(rows, tStar);
  if (at.length === 0) {
    throw new SchemaError(`no rows at sample time t = ${tStar}`);
  }
  const ns = distinctSorted(at.map((r) => r.n));
  if (ns.length < 3) {
    throw new RefusedError(
      `need at least 3 particle numbers at t = ${tStar}, found ${ns.length}`
    );
  }
  const byN = new Map<number, Row>(at.map((r) => [r.n, r]));
  const ordered = ns.map((n) => byN.get(n)!);

  const slope = logLogSlope(ns, ordered.map((r) => r.trDistParticle));

  const frame: svg.Frame = { x0: 70, y0: 40, width: 430, height: 320 };
  const positives = SERIES.flatMap((s) => ordered.map(s.pick)).filter((v) => v > 0);
  const xExt = { min: ns[0] / 1.1, max: ns[ns.length - 1] * 1.1 };
  const yExt = { min: Math.min(...positives) / 1.5, max: Math.max(...positives) * 1.5 };
  const xScale = svg.logScale(xExt, frame.x0, frame.x0 + frame.width);
  const yScale = svg.logScale(yExt, frame.y0 + frame.height, frame.y0);

  const body: string[] = [svg.frameBox(frame)];
  SERIES.forEach((s, i) => {
    const pts: Array<[number, number]> = [];
    for (const r of ordered) {
      const v = s.pick(r);
      if (v > 0) {
        pts.push([xScale(r.n), yScale(v)]);
      }
    }
    if (pts.length >= 2) {
      body.push(svg.polyline(pts, s.color, s.dash ?? ""));
      body.push(svg.circleMarkers(pts, s.color));
    }
    body.push(
      `<line x1="${frame.x0 + frame.width + 8}" y1="${58 + 16 * i}" ` +
        `x2="${frame.x0 + frame.width + 28}" y2="${58 + 16 * i}" ` +
        `stroke="${s.color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`
    );
    body.push(svg.text(frame.x0 + frame.width + 32, 62 + 16 * i, s.label, 10));
  });

  body.push(svg.xAxis(frame, ns, xScale, "N (log)"));
  body.push(svg.yAxis(frame, svg.logTicks(yExt), yScale, "distance / beta (log)"));
  body.push(svg.text(frame.x0, 24, `convergence in N at t = ${tStar}`, 13));
  body.push(
    svg.text(frame.x0 + 8, frame.y0 + 16,
             `slope(tr_dist_particle) = ${toSigFigs(slope, 3)}`, 12)
  );

  return {
    svg: svg.document(680, 430, body.join("\n")),
    slope,
    particleNumbers: ns,
  };
}
