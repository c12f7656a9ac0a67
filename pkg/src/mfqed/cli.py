"""Command-line entry point.

Subcommands: check, ms-evolve, qm-evolve, compare, sweep.
Exit codes: 0 success, 2 configuration error, 3 resource cap,
4 numerical failure, 5 property-suite failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness
from . import manybody as mb
from . import meanfield as mf
from .errors import ConfigurationError, NumericalError, ResourceCapError


def _common_flags(sub):
    sub.add_argument("--config", default=None, help="JSON config path (defaults apply)")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="override config seed")
    sub.add_argument("--threads", type=int, default=1, help="parallel workers for sweeps")
    sub.add_argument("--print-config", action="store_true",
                     help="print the resolved config and exit")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfqed",
                                description="mean-field radiation-coupling laboratory")
    subs = p.add_subparsers(dest="command", required=True)
    for name, desc in [
        ("check", "run the invariant self-check suite"),
        ("ms-evolve", "mean-field trajectory only"),
        ("qm-evolve", "many-body trajectory only (first N)"),
        ("compare", "full quantum-vs-classical comparison"),
        ("sweep", "comparison over the N list with scaling fits"),
    ]:
        sub = subs.add_parser(name, help=desc)
        _common_flags(sub)
        if name == "compare":
            sub.add_argument("--checkpoint", action="store_true",
                             help="write a state checkpoint at each sample time")
            sub.add_argument("--resume", default=None,
                             help="resume a single-N run from a checkpoint file")
    return p


def _load_config(args) -> harness.ExperimentConfig:
    if args.config is None:
        cfg = harness.ExperimentConfig.default()
    else:
        cfg = harness.ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.raw["seed"] = int(args.seed)
    return cfg


def _cmd_check(cfg, args) -> int:
    report = harness.self_check(cfg)
    print(report.text())
    return 0 if report.passed else 5


def _cmd_ms_evolve(cfg, args) -> int:
    scenario = harness.build_scenario(cfg)
    samples = harness.ms_trajectory(scenario)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{cfg.name}.ms.csv")
    with open(path, "w") as fh:
        fh.write("t,E_M,E_kinetic,E_potential,E_field,gauge_residual,norm_phi,"
                 "phi_H2,A_H2,E_H1\n")
        for s in samples:
            cells = [repr(float(v)) for v in
                     (s.t, s.e_m.total, s.e_m.kinetic, s.e_m.potential,
                      s.e_m.field, s.gauge_residual, s.norm_phi,
                      s.sobolev["phi_H2"], s.sobolev["A_H2"], s.sobolev["E_H1"])]
            fh.write(",".join(cells) + "\n")
    print(path)
    return 0


def _cmd_qm_evolve(cfg, args) -> int:
    scenario = harness.build_scenario(cfg)
    n = cfg.particle_numbers[0]
    pb, fb, h = harness._quantum_setup(scenario, n)
    psi = mb.product_initial_state(
        pb, fb, mf.flatten_phi(scenario.phi0, scenario.lattice), scenario.alpha0,
        cfg.raw["tolerances"]["leakage"])
    tol = cfg.raw["tolerances"]["propagation"]
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{cfg.name}.qm.csv")
    with open(path, "w") as fh:
        fh.write("t,N,E_many_per_N,norm_Psi,leakage\n")
        for i, t in enumerate(cfg.sample_times):
            if i > 0:
                psi = mb.propagate(psi, h, t - psi.t, tol)
                psi.t = t
            cells = [repr(float(t)), str(n), repr(h.expectation(psi.vec) / n),
                     repr(psi.norm()), repr(psi.photon_leakage())]
            fh.write(",".join(cells) + "\n")
    print(path)
    return 0


def _cmd_compare(cfg, args) -> int:
    record = harness.run_comparison(
        cfg, out_dir=args.out, checkpoint=getattr(args, "checkpoint", False),
        resume_path=getattr(args, "resume", None), threads=args.threads)
    print(os.path.join(args.out, f"{cfg.name}.csv"))
    print(json.dumps(record.summary, sort_keys=True, indent=2))
    return 0


def _cmd_sweep(cfg, args) -> int:
    record = harness.sweep_N(cfg, out_dir=args.out, threads=args.threads)
    print(os.path.join(args.out, f"{cfg.name}.csv"))
    print(json.dumps(record.summary, sort_keys=True, indent=2))
    return 0


_COMMANDS = {
    "check": _cmd_check,
    "ms-evolve": _cmd_ms_evolve,
    "qm-evolve": _cmd_qm_evolve,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.print_config:
            print(json.dumps(cfg.resolved(), sort_keys=True, indent=2))
            return 0
        return _COMMANDS[args.command](cfg, args)
    except ConfigurationError as exc:
        _emit_error(2, "configuration", exc)
        return 2
    except ResourceCapError as exc:
        _emit_error(3, "resource-cap", exc)
        return 3
    except NumericalError as exc:
        _emit_error(4, "numerical", exc)
        return 4


def _emit_error(code: int, kind: str, exc: Exception):
    payload = {"error_code": code, "kind": kind, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
