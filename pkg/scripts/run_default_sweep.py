#!/usr/bin/env python3
"""Full default-scenario sweep: N = 2..6 on the d=1 desk lattice, beta
trajectories and trace distances sampled on t in [0, 1].  Writes
out/default.csv and out/default.summary.json (roughly two minutes)."""

import json
import pathlib
import sys

from mfqed.harness import ExperimentConfig, sweep_N

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "out"
    cfg = ExperimentConfig.from_json(ROOT / "configs" / "default.json")
    record = sweep_N(cfg, out_dir=out)
    print(json.dumps(record.summary, sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
