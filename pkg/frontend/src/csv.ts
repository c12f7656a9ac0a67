/**
 * Reader for the comparison-run CSV contract.  Only the published schema
 * is consumed, never simulator internals.
 */

export const EXPECTED_COLUMNS = [
  "t",
  "N",
  "Lambda",
  "beta_a",
  "beta_b",
  "beta_c",
  "beta",
  "tr_dist_particle",
  "tr_dist_photon",
  "E_M",
  "E_many_per_N",
  "gauge_residual",
  "norm_phi",
  "norm_Psi",
  "leakage",
] as const;

export type ColumnName = (typeof EXPECTED_COLUMNS)[number];

export interface Row {
  t: number;
  n: number;
  lambda: number;
  betaA: number;
  betaB: number;
  betaC: number;
  beta: number;
  trDistParticle: number;
  trDistPhoton: number;
  eM: number;
  eManyPerN: number;
  gaugeResidual: number;
  normPhi: number;
  normPsi: number;
  leakage: number;
}

export class SchemaError extends Error {}

export class CorruptRowError extends Error {
  constructor(public readonly lineNumber: number, detail: string) {
    super(`corrupt row at line ${lineNumber}: ${detail}`);
  }
}

/** Parse the CSV text; throws SchemaError / CorruptRowError. */
export function parseRows(text: string): Row[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header line");
  }
  const header = lines[0].split(",");
  const index = new Map<string, number>();
  header.forEach((name, i) => index.set(name.trim(), i));
  const missing = EXPECTED_COLUMNS.filter((c) => !index.has(c));
  if (missing.length > 0) {
    throw new SchemaError(`missing columns: ${missing.join(", ")}`);
  }
  if (lines.length === 1) {
    throw new SchemaError("empty CSV: header but no data rows");
  }

  const rows: Row[] = [];
  for (let li = 1; li < lines.length; li++) {
    const cells = lines[li].split(",");
    if (cells.length !== header.length) {
      throw new CorruptRowError(li + 1, `expected ${header.length} cells, got ${cells.length}`);
    }
    const num = (col: ColumnName): number => {
      const raw = cells[index.get(col)!];
      const v = Number(raw);
      if (!Number.isFinite(v)) {
        throw new CorruptRowError(li + 1, `column ${col} is not a finite number: ${raw}`);
      }
      return v;
    };
    rows.push({
      t: num("t"),
      n: num("N"),
      lambda: num("Lambda"),
      betaA: num("beta_a"),
      betaB: num("beta_b"),
      betaC: num("beta_c"),
      beta: num("beta"),
      trDistParticle: num("tr_dist_particle"),
      trDistPhoton: num("tr_dist_photon"),
      eM: num("E_M"),
      eManyPerN: num("E_many_per_N"),
      gaugeResidual: num("gauge_residual"),
      normPhi: num("norm_phi"),
      normPsi: num("norm_Psi"),
      leakage: num("leakage"),
    });
  }
  return rows;
}

export function distinctSorted(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

export function rowsAtTime(rows: Row[], tStar: number, tol = 1e-9): Row[] {
  return rows.filter((r) => Math.abs(r.t - tStar) <= tol);
}
