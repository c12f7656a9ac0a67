"""Experiment orchestration: configuration, quantum-vs-classical
comparison runs, N sweeps with trend analysis, and the invariant
self-check suite.

CSV contract (one row per sample time per N):

    t,N,Lambda,beta_a,beta_b,beta_c,beta,tr_dist_particle,tr_dist_photon,
    E_M,E_many_per_N,gauge_residual,norm_phi,norm_Psi,leakage

Identical config + seed produces identical CSV bytes; floats are written
with shortest round-trip repr.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import functionals as fn
from . import manybody as mb
from . import meanfield as mf
from .errors import ConfigurationError, NumericalError
from .field_modes import LatticeSpec, ModeSet, build_mode_set
from .fock import CoherentAmplitude, FockBasis, ladder_operators, weyl_operator
from .functionals import CSV_COLUMNS, BetaReport


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "name": "run",
    "lattice": {"dimension": 1, "sites": 8, "length": 2.0 * np.pi},
    "cutoff": 2.5,
    "potential": {"kind": "gaussian", "strength": 1.0, "width": 0.8},
    "particle_numbers": [2, 3, 4, 5, 6],
    "n_photon_max": 6,
    "initial_wavefunction": {
        "preset": "gaussian-packet",
        "center": np.pi,
        "width": 1.2,
        "boost": 1,
    },
    "initial_alpha": [
        {"k": [1], "pol": 0, "re": 0.12, "im": 0.0},
        {"k": [-1], "pol": 0, "re": 0.08, "im": 0.04},
    ],
    "time": {"t_max": 1.0, "dt": 1e-3, "sample_stride": 250},
    "tolerances": {"propagation": 1e-10, "leakage": 1e-6, "ms": 1e-12},
    "dimension_cap": 5_000_000,
    "seed": 0,
}


def _merge(defaults, override):
    if isinstance(defaults, dict):
        if not isinstance(override, dict):
            raise ConfigurationError(f"expected a mapping, got {override!r}")
        out = {}
        for key in defaults:
            out[key] = _merge(defaults[key], override[key]) if key in override else defaults[key]
        extra = set(override) - set(defaults)
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        return out
    return override


@dataclass
class ExperimentConfig:
    raw: dict = field(repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        merged = _merge(_DEFAULTS, data or {})
        cfg = cls(merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc

    @classmethod
    def default(cls, **overrides) -> "ExperimentConfig":
        return cls.from_dict(overrides)

    def validate(self):
        r = self.raw
        lat = r["lattice"]
        LatticeSpec(lat["dimension"], lat["sites"], lat["length"])
        if not r["cutoff"] > 0:
            raise ConfigurationError("cutoff must be positive")
        ns = r["particle_numbers"]
        if not ns or any(int(n) < 1 for n in ns):
            raise ConfigurationError("particle_numbers must be positive integers")
        if sorted(set(int(n) for n in ns)) != [int(n) for n in ns]:
            raise ConfigurationError("particle_numbers must be strictly increasing")
        if r["potential"]["kind"] not in ("gaussian", "none"):
            raise ConfigurationError(f"unknown potential kind {r['potential']['kind']!r}")
        preset = r["initial_wavefunction"].get("preset")
        if preset not in ("uniform", "plane-wave", "gaussian-packet"):
            raise ConfigurationError(f"unknown wavefunction preset {preset!r}")
        t = r["time"]
        if not (t["t_max"] > 0 and t["dt"] > 0 and int(t["sample_stride"]) >= 1):
            raise ConfigurationError("time grid must have positive t_max, dt, stride >= 1")
        n_steps = t["t_max"] / t["dt"]
        if abs(n_steps - round(n_steps)) > 1e-9:
            raise ConfigurationError("t_max must be an integer number of dt steps")
        if int(round(n_steps)) % int(t["sample_stride"]) != 0:
            raise ConfigurationError("sample_stride must divide the step count")
        if int(r["n_photon_max"]) < 0:
            raise ConfigurationError("n_photon_max must be nonnegative")

    def resolved(self) -> dict:
        def clean(x):
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            if isinstance(x, (np.floating, float)):
                return float(x)
            if isinstance(x, (np.integer, int)):
                return int(x)
            return x
        return clean(self.raw)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.resolved(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def particle_numbers(self) -> list[int]:
        return [int(n) for n in self.raw["particle_numbers"]]

    @property
    def sample_times(self) -> list[float]:
        t = self.raw["time"]
        n_steps = int(round(t["t_max"] / t["dt"]))
        stride = int(t["sample_stride"])
        return [i * stride * t["dt"] for i in range(n_steps // stride + 1)]


# ---------------------------------------------------------------------------
# scenario assembly
# ---------------------------------------------------------------------------

def gaussian_potential_table(lattice: LatticeSpec, strength: float, width: float,
                             images: int = 4) -> np.ndarray:
    """Periodized Gaussian pair potential on displacement sites: positive,
    real, even, bounded."""
    pos = lattice.site_positions()
    out = np.zeros(lattice.n_sites)
    for img in itertools.product(range(-images, images + 1), repeat=lattice.dimension):
        shift = np.asarray(img, dtype=float) * lattice.length
        out += strength * np.exp(-np.sum((pos + shift) ** 2, axis=1) / (2.0 * width**2))
    return out


def initial_wavefunction(lattice: LatticeSpec, spec: dict) -> np.ndarray:
    """Named presets, physically normalized."""
    pos = lattice.site_positions()
    preset = spec["preset"]
    if preset == "uniform":
        phi = np.ones(lattice.n_sites, dtype=complex)
    elif preset == "plane-wave":
        mode = np.atleast_1d(np.asarray(spec.get("mode", 1), dtype=float))
        if len(mode) != lattice.dimension:
            mode = np.full(lattice.dimension, float(np.ravel(mode)[0]))
        phi = np.exp(1j * pos @ (mode * lattice.dk))
    elif preset == "gaussian-packet":
        center = np.full(lattice.dimension, float(spec.get("center", lattice.length / 2)))
        width = float(spec.get("width", lattice.length / 6))
        boost = np.atleast_1d(np.asarray(spec.get("boost", 0), dtype=float))
        if len(boost) != lattice.dimension:
            boost = np.full(lattice.dimension, float(np.ravel(boost)[0]))
        phi = np.zeros(lattice.n_sites, dtype=complex)
        for img in itertools.product(range(-3, 4), repeat=lattice.dimension):
            shift = np.asarray(img, dtype=float) * lattice.length
            phi += np.exp(-np.sum((pos - center + shift) ** 2, axis=1) / (2.0 * width**2))
        phi = phi * np.exp(1j * pos @ (boost * lattice.dk))
    else:
        raise ConfigurationError(f"unknown preset {preset!r}")
    norm = np.sqrt(lattice.dx**lattice.dimension * np.sum(np.abs(phi) ** 2))
    return phi / norm


def initial_amplitude(modes: ModeSet, entries: list) -> CoherentAmplitude:
    table = {}
    for e in entries:
        key = (tuple(int(v) for v in e["k"]), int(e.get("pol", 0)))
        table[key] = complex(float(e.get("re", 0.0)), float(e.get("im", 0.0)))
    return CoherentAmplitude.from_dict(modes, table)


@dataclass
class Scenario:
    cfg: ExperimentConfig
    lattice: LatticeSpec
    modes: ModeSet
    v_table: np.ndarray | None
    phi0: np.ndarray
    alpha0: CoherentAmplitude

    @property
    def ms_params(self) -> mf.MSParams:
        t = self.cfg.raw["time"]
        return mf.MSParams(self.cfg.raw["cutoff"], self.v_table, t["dt"],
                           tolerance=self.cfg.raw["tolerances"]["ms"])


def build_scenario(cfg: ExperimentConfig) -> Scenario:
    lat_spec = cfg.raw["lattice"]
    lattice = LatticeSpec(lat_spec["dimension"], lat_spec["sites"], lat_spec["length"])
    modes = build_mode_set(lattice, cfg.raw["cutoff"], allow_empty=True)
    pot = cfg.raw["potential"]
    v_table = None
    if pot["kind"] == "gaussian" and pot["strength"] != 0:
        v_table = gaussian_potential_table(lattice, pot["strength"], pot["width"])
    phi0 = initial_wavefunction(lattice, cfg.raw["initial_wavefunction"])
    alpha0 = initial_amplitude(modes, cfg.raw["initial_alpha"])
    return Scenario(cfg, lattice, modes, v_table, phi0, alpha0)


# ---------------------------------------------------------------------------
# mean-field trajectory sampling
# ---------------------------------------------------------------------------

@dataclass
class MSSample:
    t: float
    phi_flat: np.ndarray
    alpha: CoherentAmplitude
    e_m: mf.MSEnergy
    gauge_residual: float
    norm_phi: float
    sobolev: dict


def ms_trajectory(scenario: Scenario) -> list[MSSample]:
    cfg = scenario.cfg
    t_spec = cfg.raw["time"]
    stride = int(t_spec["sample_stride"])
    n_steps = int(round(t_spec["t_max"] / t_spec["dt"]))
    params = scenario.ms_params
    a4, e4 = mf.initial_fields_from_alpha(scenario.alpha0)
    state = mf.EffectiveState(scenario.lattice, scenario.modes,
                              scenario.phi0.copy(), a4, e4, 0.0)

    def snap(s: mf.EffectiveState) -> MSSample:
        _u, alpha_t = mf.alpha_from_fields(scenario.modes, s.a_four, s.e_four)
        return MSSample(s.t, s.phi_flat(), alpha_t, mf.ms_energy(s, params),
                        s.gauge_residual(), s.phi_norm(), mf.sobolev_norms(s))

    samples = [snap(state)]
    for step in range(n_steps):
        state = mf.ms_step(state, params)
        if (step + 1) % stride == 0:
            state.t = round(state.t / t_spec["dt"]) * t_spec["dt"]
            samples.append(snap(state))
    return samples


# ---------------------------------------------------------------------------
# quantum run and comparison rows
# ---------------------------------------------------------------------------

def _quantum_setup(scenario: Scenario, n: int):
    cfg = scenario.cfg
    fb = FockBasis.build(scenario.modes, int(cfg.raw["n_photon_max"]))
    pb = mb.ParticleBasis.build(scenario.lattice, n)
    spec = mb.HamiltonianSpec(n, scenario.v_table, cfg.raw["cutoff"],
                              dimension_cap=int(cfg.raw["dimension_cap"]))
    h = mb.assemble_pauli_fierz(pb, fb, spec)
    return pb, fb, h


def _beta_report(psi: mb.CompositeState, h, sample: MSSample, cfg: ExperimentConfig,
                 n: int) -> BetaReport:
    phi_flat = sample.phi_flat
    alpha_t = sample.alpha
    gamma_p = mb.reduced_density_particle(psi)
    beta_a = fn._clip_nonneg(1.0 - float(np.real(np.vdot(phi_flat, gamma_p @ phi_flat))), "beta_a")
    beta_b = fn.beta_b(psi, alpha_t)
    beta_c = fn.beta_c(psi, h, sample.e_m.total)
    tr_p = fn.trace_norm_distance(gamma_p, np.outer(phi_flat, np.conj(phi_flat)))
    gamma_f = mb.reduced_energy_matrix_photon(psi)
    u_flat = alpha_t.energy_mode_flat()
    tr_f = fn.trace_norm_distance(gamma_f, np.outer(u_flat, np.conj(u_flat)))
    report = BetaReport(
        t=psi.t, n_particles=n, cutoff=cfg.raw["cutoff"],
        beta_a=beta_a, beta_b=beta_b, beta_c=beta_c,
        tr_dist_particle=tr_p, tr_dist_photon=tr_f,
        e_m=sample.e_m.total, e_many_per_n=h.expectation(psi.vec) / n,
        gauge_residual=sample.gauge_residual, norm_phi=sample.norm_phi,
        norm_psi=psi.norm(), leakage=psi.photon_leakage(),
    )
    report.validate()
    return report


def quantum_run(scenario: Scenario, n: int, samples: list[MSSample],
                checkpoint_dir=None, resume: dict | None = None) -> list[BetaReport]:
    cfg = scenario.cfg
    pb, fb, h = _quantum_setup(scenario, n)
    tol = cfg.raw["tolerances"]["propagation"]
    leak_tol = cfg.raw["tolerances"]["leakage"]

    start_index = 0
    if resume is not None:
        start_index = int(resume["sample_index"])
        psi = mb.CompositeState(pb, fb, np.asarray(resume["vec"], dtype=complex),
                                float(resume["t"]))
    else:
        psi = mb.product_initial_state(pb, fb, mf.flatten_phi(scenario.phi0, scenario.lattice),
                                       scenario.alpha0, leak_tol)

    rows = []
    if resume is None:
        rows.append(_beta_report(psi, h, samples[0], cfg, n))
        if checkpoint_dir is not None:
            save_checkpoint(checkpoint_dir, cfg, n, 0, psi)
    for idx in range(start_index + 1, len(samples)):
        dt = samples[idx].t - psi.t
        psi = mb.propagate(psi, h, dt, tol)
        psi.t = samples[idx].t
        rows.append(_beta_report(psi, h, samples[idx], cfg, n))
        if checkpoint_dir is not None:
            save_checkpoint(checkpoint_dir, cfg, n, idx, psi)
    return rows


def save_checkpoint(out_dir, cfg: ExperimentConfig, n: int, sample_index: int,
                    psi: mb.CompositeState):
    """NPZ container: config_hash, N, t, sample_index, vec (complex128).
    Layout documented in the README."""
    import os

    os.makedirs(str(out_dir), exist_ok=True)
    path = os.path.join(str(out_dir), f"{cfg.name}.N{n}.s{sample_index}.ckpt.npz")
    np.savez(path, config_hash=cfg.config_hash, n=n, t=psi.t,
             sample_index=sample_index, vec=psi.vec)
    return path


def load_checkpoint(path, cfg: ExperimentConfig) -> dict:
    data = np.load(path, allow_pickle=False)
    if str(data["config_hash"]) != cfg.config_hash:
        raise ConfigurationError(
            f"checkpoint hash {data['config_hash']} does not match config "
            f"{cfg.config_hash}"
        )
    return {"n": int(data["n"]), "t": float(data["t"]),
            "sample_index": int(data["sample_index"]), "vec": data["vec"]}


# ---------------------------------------------------------------------------
# records, analysis, output
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    config_hash: str
    rows: list
    wallclock: float
    summary: dict

    def csv_text(self) -> str:
        lines = [CSV_COLUMNS]
        lines += [r.csv_row() for r in self.rows]
        return "\n".join(lines) + "\n"


def _loglog_slope(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = ys > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])


def analyze_rows(rows: list, cfg: ExperimentConfig) -> dict:
    ns = sorted({r.n_particles for r in rows})
    times = sorted({round(r.t, 12) for r in rows})
    cutoff = cfg.raw["cutoff"]
    by = {(r.n_particles, round(r.t, 12)): r for r in rows}

    beta_c0 = [by[(n, times[0])].beta_c for n in ns]
    summary = {
        "config_hash": cfg.config_hash,
        "particle_numbers": ns,
        "sample_times": times,
        "beta_c0": dict(zip(map(str, ns), beta_c0)),
        "beta_c0_loglog_slope": _loglog_slope(ns, beta_c0),
        "trace_particle_slope": {},
        "monotone_trace_particle": {},
    }
    for t in times[1:]:
        tds = [by[(n, t)].tr_dist_particle for n in ns]
        summary["trace_particle_slope"][repr(float(t))] = _loglog_slope(ns, tds)
        summary["monotone_trace_particle"][repr(float(t))] = bool(
            all(tds[i + 1] <= tds[i] + 1e-12 for i in range(len(tds) - 1))
        )

    # Gronwall envelope: a single growth rate C, fitted by least squares on
    # log beta_N(t) with per-N intercepts, must make beta(t) <= (beta(0) +
    # Lambda/N) e^{C t} hold one-sidedly at every sample
    num = den = 0.0
    if len(times) > 1:
        for n in ns:
            ts = np.asarray(times)
            ys = np.log([max(by[(n, t)].beta, 1e-300) for t in times])
            num += np.sum((ts - ts.mean()) * (ys - ys.mean()))
            den += np.sum((ts - ts.mean()) ** 2)
    if den > 0:
        c_fit = float(num / den)
        ratios = []
        for n in ns:
            d_n = by[(n, times[0])].beta + cutoff / n
            for t in times:
                ratios.append(by[(n, t)].beta / (d_n * np.exp(c_fit * t)))
        summary["envelope_C"] = c_fit
        summary["envelope_max_ratio"] = float(np.max(ratios))
    return summary


def run_comparison(cfg: ExperimentConfig, out_dir=None, checkpoint=False,
                   resume_path=None, threads: int = 1) -> RunRecord:
    """Propagate the many-body and mean-field systems on the shared
    lattice and emit one BetaReport per (N, sample time)."""
    t_start = time.time()
    scenario = build_scenario(cfg)
    samples = ms_trajectory(scenario)
    ckpt_dir = out_dir if (checkpoint and out_dir is not None) else None

    resume = None
    ns = cfg.particle_numbers
    if resume_path is not None:
        resume = load_checkpoint(resume_path, cfg)
        ns = [resume["n"]]

    rows = []
    if threads > 1 and resume is None and len(ns) > 1:
        rows = _parallel_quantum_runs(cfg, ns, threads)
    else:
        for n in ns:
            rows.extend(quantum_run(scenario, n, samples, ckpt_dir, resume))
    rows.sort(key=lambda r: (r.n_particles, r.t))

    record = RunRecord(cfg.config_hash, rows, time.time() - t_start,
                       analyze_rows(rows, cfg))
    if out_dir is not None:
        write_outputs(record, cfg, out_dir)
    return record


def _run_single_n(payload):
    cfg_dict, n = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    scenario = build_scenario(cfg)
    samples = ms_trajectory(scenario)
    return quantum_run(scenario, n, samples)


def _parallel_quantum_runs(cfg: ExperimentConfig, ns, threads: int):
    rows = []
    payloads = [(cfg.resolved(), n) for n in ns]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        for chunk in pool.map(_run_single_n, payloads):
            rows.extend(chunk)
    return rows


def write_outputs(record: RunRecord, cfg: ExperimentConfig, out_dir):
    import os

    os.makedirs(str(out_dir), exist_ok=True)
    csv_path = os.path.join(str(out_dir), f"{cfg.name}.csv")
    with open(csv_path, "w") as fh:
        fh.write(record.csv_text())
    summary = dict(record.summary)
    summary["wallclock_seconds"] = round(record.wallclock, 3)
    summary["config"] = cfg.resolved()
    json_path = os.path.join(str(out_dir), f"{cfg.name}.summary.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return csv_path, json_path


def sweep_N(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> RunRecord:
    """run_comparison over the configured N list plus scaling fits;
    requires at least three particle numbers."""
    if len(cfg.particle_numbers) < 3:
        raise ConfigurationError(
            f"sweep needs >= 3 particle numbers, got {cfg.particle_numbers}"
        )
    return run_comparison(cfg, out_dir=out_dir, threads=threads)


# ---------------------------------------------------------------------------
# self-check suite
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


@dataclass
class CheckReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"[{status}] {c.name} ({c.seconds:.2f}s) {c.detail}")
        return "\n".join(lines)


def _check(name, fn_check, checks):
    t0 = time.time()
    try:
        ok, detail = fn_check()
    except Exception as exc:  # a crash is a failure, not an abort
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    checks.append(CheckResult(name, bool(ok), detail, time.time() - t0))


def self_check(cfg: ExperimentConfig | None = None, inject_fault: str | None = None) -> CheckReport:
    """Reduced-size property suite: CCR, Weyl identities, field-operator
    relation, hermiticity, gauge, trace-norm relation bounds, conservation.

    `inject_fault` deliberately breaks one ingredient ("gauge": drop the
    transverse projection; "hermiticity": skip the cross-term
    symmetrization) so the corresponding check must fail.
    """
    if cfg is None:
        cfg = ExperimentConfig.default()
    seed = int(cfg.raw["seed"])
    checks: list[CheckResult] = []

    lat = LatticeSpec(1, 8, 2.0 * np.pi)
    modes = build_mode_set(lat, 1.2)
    fb = FockBasis.build(modes, 4)

    def ccr():
        a0, ad0 = ladder_operators(fb, 0)
        comm = (a0.mat @ ad0.mat - ad0.mat @ a0.mat).toarray()
        mask = fb.sector_mask(fb.n_max - 1)
        defect = np.max(np.abs(comm[np.ix_(mask, mask)] - np.eye(int(mask.sum()))))
        return defect <= 1e-12, f"safe-subspace defect {defect:.2e}"

    _check("ccr_safe_subspace", ccr, checks)

    def weyl():
        alpha = CoherentAmplitude.from_dict(modes, {((1,), 0): 0.3})
        w = weyl_operator(fb, alpha)
        unit = np.max(np.abs(w.mat @ w.mat.conj().T - np.eye(fb.dim)))
        winv = weyl_operator(fb, -1.0 * alpha)
        inv = np.max(np.abs(w.mat.conj().T - winv.mat))
        ok = unit <= 1e-12 and inv <= 1e-12
        return ok, f"unitarity {unit:.2e}, W(f)^dag=W(-f) {inv:.2e}"

    _check("weyl_unitarity", weyl, checks)

    def field_relation():
        from .fock import eta_position_kernel, field_operators

        pos = lat.site_positions()
        ops = [field_operators(fb, p) for p in pos]
        disp = (pos[:, None, :] - pos[None, :, :]).reshape(-1, 1)
        eta = eta_position_kernel(modes, disp).reshape(lat.n_sites, lat.n_sites)
        worst = 0.0
        for xi in range(lat.n_sites):
            conv = sum(lat.dx * eta[xi, yi] * ops[yi].E_plus[0].mat
                       for yi in range(lat.n_sites))
            worst = max(worst, np.max(np.abs((ops[xi].A_plus[0].mat + 1j * conv).toarray())))
        return worst <= 1e-12, f"A+ vs -i eta*E+ defect {worst:.2e}"

    _check("field_operator_relation", field_relation, checks)

    def hermiticity():
        pb = mb.ParticleBasis.build(lat, 2)
        v_tab = gaussian_potential_table(lat, 1.0, 0.8)
        spec = mb.HamiltonianSpec(2, v_tab, 1.2,
                                  symmetrize_cross=(inject_fault != "hermiticity"))
        h = mb.PauliFierzOperator(pb, fb, spec)
        defect = h.hermiticity_defect()
        return defect <= 1e-12, f"probe defect {defect:.2e}"

    _check("hamiltonian_hermiticity", hermiticity, checks)

    def gauge():
        lat3 = LatticeSpec(3, 4, 2.0 * np.pi)
        modes3 = build_mode_set(lat3, 1.2)
        phi3 = initial_wavefunction(lat3, {"preset": "gaussian-packet",
                                           "center": np.pi, "width": 1.1, "boost": 1})
        alpha3 = CoherentAmplitude.from_dict(modes3, {((0, 0, 1), 0): 0.1,
                                                      ((1, 0, 0), 1): 0.05})
        a4, e4 = mf.initial_fields_from_alpha(alpha3)
        state = mf.EffectiveState(lat3, modes3, phi3, a4, e4, 0.0)
        params = mf.MSParams(1.2, gaussian_potential_table(lat3, 0.5, 0.9), 5e-3)
        for _ in range(40):
            state = _ms_step_maybe_faulty(state, params, inject_fault == "gauge")
        resid = state.gauge_residual()
        return resid <= 1e-12, f"gauge residual {resid:.2e}"

    _check("coulomb_gauge", gauge, checks)

    def trace_bounds():
        rng = np.random.default_rng(seed)
        lat2 = LatticeSpec(1, 4, 2.0 * np.pi)
        modes2 = build_mode_set(lat2, 1.2)
        fb2 = FockBasis.build(modes2, 2)
        pb2 = mb.ParticleBasis.build(lat2, 2)
        worst = 0
        for _ in range(50):
            vec = rng.normal(size=pb2.dim * fb2.dim) + 1j * rng.normal(size=pb2.dim * fb2.dim)
            vec /= np.linalg.norm(vec)
            psi = mb.CompositeState(pb2, fb2, vec)
            phi = rng.normal(size=4) + 1j * rng.normal(size=4)
            phi /= np.linalg.norm(phi)
            alpha = CoherentAmplitude(modes2, 0.3 * (rng.normal(size=2) + 1j * rng.normal(size=2)))
            report = fn.lemma_bounds_check(psi, phi, alpha)
            worst += len(report.violations)
        return worst == 0, f"{worst} violations over 50 random states"

    _check("trace_norm_bounds", trace_bounds, checks)

    def conservation():
        scen = build_scenario(ExperimentConfig.default(**{
            "particle_numbers": [2],
            "time": {"t_max": 0.1, "dt": 1e-3, "sample_stride": 100},
        }))
        samples = ms_trajectory(scen)
        rows = quantum_run(scen, 2, samples)
        e_drift = abs(rows[-1].e_many_per_n - rows[0].e_many_per_n)
        n_drift = abs(rows[-1].norm_psi - 1.0)
        ok = e_drift <= 1e-9 and n_drift <= 1e-9
        return ok, f"<H>/N drift {e_drift:.2e}, norm drift {n_drift:.2e}"

    _check("short_run_conservation", conservation, checks)

    return CheckReport(checks)


def _ms_step_maybe_faulty(state, params, drop_projection: bool):
    """ms_step with an optional fault: skip the transverse projection of
    the source (self-check must then flag the gauge residual)."""
    if not drop_projection:
        return mf.ms_step(state, params)
    original = mf._transverse_source

    def unprojected(lattice, cutoff, phi, a_kappa_real):
        d = lattice.dimension
        j = mf.current_density(lattice, phi, a_kappa_real)
        shape = (lattice.sites_per_axis,) * d
        scale = (2.0 * np.pi) ** (-d / 2.0) * lattice.dx**d
        j_four = np.stack([scale * np.fft.fftn(row.reshape(shape)) for row in j])
        mask = mf.cutoff_mask(lattice, cutoff)
        return j_four * mask[None, ...]

    mf._transverse_source = unprojected
    try:
        return mf.ms_step(state, params)
    finally:
        mf._transverse_source = original
