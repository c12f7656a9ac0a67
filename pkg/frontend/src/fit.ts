/** Least-squares slope of log(y) against log(x); positive y only. */
export function logLogSlope(xs: number[], ys: number[]): number {
  const lx: number[] = [];
  const ly: number[] = [];
  for (let i = 0; i < xs.length; i++) {
    if (ys[i] > 0 && xs[i] > 0) {
      lx.push(Math.log(xs[i]));
      ly.push(Math.log(ys[i]));
    }
  }
  if (lx.length < 2) {
    return NaN;
  }
  const mx = lx.reduce((a, b) => a + b, 0) / lx.length;
  const my = ly.reduce((a, b) => a + b, 0) / ly.length;
  let num = 0;
  let den = 0;
  for (let i = 0; i < lx.length; i++) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

/** Format with the given number of significant digits (default 3). */
export function toSigFigs(value: number, digits = 3): string {
  if (!Number.isFinite(value)) {
    return String(value);
  }
  return Number(value.toPrecision(digits)).toString();
}
