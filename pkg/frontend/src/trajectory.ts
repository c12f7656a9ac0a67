/**
 * Trajectory figure: beta parts against time on the top panel, the
 * mean-field energy and per-particle many-body energy on the bottom one.
 * Runs with several N draw one curve per N.
 */

import { Row, SchemaError, distinctSorted, parseRows } from "./csv.js";
import * as svg from "./svg.js";

export interface TrajectoryResult {
  svg: string;
  particleNumbers: number[];
  times: number[];
}

interface BetaSeries {
  label: string;
  pick: (r: Row) => number;
  color: string;
}

const BETA_SERIES: BetaSeries[] = [
  { label: "beta_a", pick: (r) => r.betaA, color: svg.PALETTE[2] },
  { label: "beta_b", pick: (r) => r.betaB, color: svg.PALETTE[3] },
  { label: "beta_c", pick: (r) => r.betaC, color: svg.PALETTE[4] },
  { label: "beta", pick: (r) => r.beta, color: svg.PALETTE[0] },
];

export function renderTrajectory(csvText: string): TrajectoryResult {
  const rows = parseRows(csvText);
  const ns = distinctSorted(rows.map((r) => r.n));
  const times = distinctSorted(rows.map((r) => r.t));
  if (times.length < 2) {
    throw new SchemaError("trajectory plot needs at least two sample times");
  }
  const byN = new Map<number, Row[]>();
  for (const n of ns) {
    byN.set(n, rows.filter((r) => r.n === n).sort((a, b) => a.t - b.t));
  }

  const top: svg.Frame = { x0: 70, y0: 36, width: 440, height: 220 };
  const bottom: svg.Frame = { x0: 70, y0: 320, width: 440, height: 170 };

  const xExt = svg.extend(times, 0.02);
  const xTop = svg.linearScale(xExt, top.x0, top.x0 + top.width);
  const xBot = svg.linearScale(xExt, bottom.x0, bottom.x0 + bottom.width);

  const betaVals = rows.flatMap((r) => BETA_SERIES.map((s) => s.pick(r)));
  const yExtTop = svg.extend([0, ...betaVals]);
  const yTop = svg.linearScale(yExtTop, top.y0 + top.height, top.y0);

  const energyVals = rows.flatMap((r) => [r.eM, r.eManyPerN]);
  const yExtBot = svg.extend(energyVals);
  const yBot = svg.linearScale(yExtBot, bottom.y0 + bottom.height, bottom.y0);

  const body: string[] = [svg.frameBox(top), svg.frameBox(bottom)];

  ns.forEach((n, ni) => {
    const series = byN.get(n)!;
    const alpha = ns.length > 1 ? 0.45 + (0.55 * (ni + 1)) / ns.length : 1.0;
    for (const s of BETA_SERIES) {
      const pts = series.map((r) => [xTop(r.t), yTop(s.pick(r))] as [number, number]);
      body.push(
        `<g opacity="${alpha.toFixed(2)}">` + svg.polyline(pts, s.color) + "</g>"
      );
    }
    const ptsE = series.map((r) => [xBot(r.t), yBot(r.eManyPerN)] as [number, number]);
    body.push(`<g opacity="${alpha.toFixed(2)}">` + svg.polyline(ptsE, svg.PALETTE[1]) + "</g>");
  });
  // mean-field energy is shared across N: draw once
  const first = byN.get(ns[0])!;
  body.push(svg.polyline(first.map((r) => [xBot(r.t), yBot(r.eM)]), "#111", "5 3"));

  BETA_SERIES.forEach((s, i) => {
    body.push(
      `<line x1="${top.x0 + top.width + 8}" y1="${50 + 16 * i}" ` +
        `x2="${top.x0 + top.width + 28}" y2="${50 + 16 * i}" stroke="${s.color}" stroke-width="2"/>`
    );
    body.push(svg.text(top.x0 + top.width + 32, 54 + 16 * i, s.label, 10));
  });
  body.push(
    `<line x1="${bottom.x0 + bottom.width + 8}" y1="334" x2="${bottom.x0 + bottom.width + 28}" ` +
      `y2="334" stroke="#111" stroke-width="2" stroke-dasharray="5 3"/>`
  );
  body.push(svg.text(bottom.x0 + bottom.width + 32, 338, "E_M", 10));
  body.push(
    `<line x1="${bottom.x0 + bottom.width + 8}" y1="350" x2="${bottom.x0 + bottom.width + 28}" ` +
      `y2="350" stroke="${svg.PALETTE[1]}" stroke-width="2"/>`
  );
  body.push(svg.text(bottom.x0 + bottom.width + 32, 354, "<H>/N", 10));

  body.push(svg.xAxis(top, svg.linearTicks(xExt), xTop, "t"));
  body.push(svg.yAxis(top, svg.linearTicks(yExtTop), yTop, "beta parts"));
  body.push(svg.xAxis(bottom, svg.linearTicks(xExt), xBot, "t"));
  body.push(svg.yAxis(bottom, svg.linearTicks(yExtBot), yBot, "energy"));
  const nsLabel = ns.join(", ");
  body.push(svg.text(top.x0, 20, `beta trajectories and energies (N = ${nsLabel})`, 13));

  return { svg: svg.document(660, 540, body.join("\n")), particleNumbers: ns, times };
}
