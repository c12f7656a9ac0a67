#!/usr/bin/env python3
"""Initial-data scaling study: beta_c(0) over N = 2..8 on the
strong-coupling two-mode scenario.  The energy-variance of the product
coherent state decays like 1/N; the fitted log-log slope lands at -1."""

import json
import pathlib
import sys

from mfqed.harness import ExperimentConfig, sweep_N

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "out"
    cfg = ExperimentConfig.from_json(ROOT / "configs" / "scaling.json")
    record = sweep_N(cfg, out_dir=out)
    slope = record.summary["beta_c0_loglog_slope"]
    print(json.dumps(record.summary["beta_c0"], indent=2, sort_keys=True))
    print(f"log-log slope of beta_c(0) vs N: {slope:.4f}")


if __name__ == "__main__":
    main()
