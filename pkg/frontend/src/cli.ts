#!/usr/bin/env node
/**
 * plot convergence --csv PATH [--csv PATH ...] --t T --out FIG.svg
 * plot trajectory  --csv PATH --out FIG.svg
 */

import { readFileSync, writeFileSync } from "node:fs";
import process from "node:process";

import { CorruptRowError, SchemaError } from "./csv.js";
import { RefusedError, renderConvergence } from "./convergence.js";
import { renderTrajectory } from "./trajectory.js";

export type FigureKind = "convergence" | "trajectory";

/** One figure request: inputs, kind, axis scales and the output path. */
export interface FigureSpec {
  kind: FigureKind;
  csvPaths: string[];
  sampleTime: number | null;
  axisScales: { x: "log" | "linear"; y: "log" | "linear" };
  outPath: string;
}

const AXIS_SCALES: Record<FigureKind, FigureSpec["axisScales"]> = {
  convergence: { x: "log", y: "log" },
  trajectory: { x: "linear", y: "linear" },
};

function parseArgs(argv: string[]): FigureSpec {
  const [kind, ...rest] = argv;
  if (kind !== "convergence" && kind !== "trajectory") {
    throw new SchemaError(`usage: plot convergence|trajectory --csv PATH [--t T] --out PATH`);
  }
  const spec: FigureSpec = {
    kind,
    csvPaths: [],
    sampleTime: null,
    axisScales: AXIS_SCALES[kind],
    outPath: "",
  };
  for (let i = 0; i < rest.length; i++) {
    switch (rest[i]) {
      case "--csv":
        spec.csvPaths.push(rest[++i]);
        break;
      case "--t":
        spec.sampleTime = Number(rest[++i]);
        break;
      case "--out":
        spec.outPath = rest[++i];
        break;
      default:
        throw new SchemaError(`unknown flag ${rest[i]}`);
    }
  }
  if (spec.csvPaths.length === 0 || !spec.outPath) {
    throw new SchemaError("--csv and --out are required");
  }
  return spec;
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    const texts = spec.csvPaths.map((p) => readFileSync(p, "utf8"));
    if (spec.kind === "convergence") {
      const tStar = spec.sampleTime ?? NaN;
      if (!Number.isFinite(tStar)) {
        throw new SchemaError("convergence plot needs --t SAMPLE_TIME");
      }
      const result = renderConvergence(texts, tStar);
      writeFileSync(spec.outPath, result.svg);
      console.log(`${spec.outPath} slope=${result.slope}`);
    } else {
      const result = renderTrajectory(texts[0]);
      writeFileSync(spec.outPath, result.svg);
      console.log(`${spec.outPath} N=[${result.particleNumbers.join(",")}]`);
    }
    return 0;
  } catch (err) {
    if (err instanceof RefusedError) {
      console.error(`refused: ${(err as Error).message}`);
      return 2;
    }
    if (err instanceof SchemaError || err instanceof CorruptRowError) {
      console.error(`schema error: ${(err as Error).message}`);
      return 2;
    }
    console.error(String(err));
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
