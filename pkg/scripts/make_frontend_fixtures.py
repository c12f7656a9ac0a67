#!/usr/bin/env python3
"""Regenerate the CSV/JSON fixtures consumed by the frontend plot tests.

Runs a trimmed sweep (N = 2, 3, 4) of the default scenario and copies the
outputs into frontend/fixtures/."""

import pathlib

from mfqed.harness import ExperimentConfig, sweep_N

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    fixtures = ROOT / "frontend" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig.default(**{
        "name": "fixture",
        "particle_numbers": [2, 3, 4],
        "time": {"t_max": 1.0, "dt": 1e-3, "sample_stride": 250},
    })
    sweep_N(cfg, out_dir=str(fixtures))
    print("wrote", fixtures / "fixture.csv")
    print("wrote", fixtures / "fixture.summary.json")


if __name__ == "__main__":
    main()
