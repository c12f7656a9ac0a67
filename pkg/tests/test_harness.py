import json
import os

import numpy as np
import pytest

from mfqed import cli, harness
from mfqed.errors import ConfigurationError
from mfqed.functionals import CSV_COLUMNS, BetaReport


TINY = {
    "name": "tiny",
    "particle_numbers": [2],
    "time": {"t_max": 0.1, "dt": 1e-3, "sample_stride": 50},
}


def test_defaulting_and_unknown_keys():
    cfg = harness.ExperimentConfig.default()
    assert cfg.raw["lattice"]["sites"] == 8
    assert cfg.particle_numbers == [2, 3, 4, 5, 6]
    with pytest.raises(ConfigurationError):
        harness.ExperimentConfig.from_dict({"walrus": 1})
    with pytest.raises(ConfigurationError):
        harness.ExperimentConfig.from_dict({"time": {"t_max": 1.0, "dt": 0.3,
                                                     "sample_stride": 1}})
    with pytest.raises(ConfigurationError):
        harness.ExperimentConfig.from_dict({"particle_numbers": []})


def test_config_hash_deterministic_and_sensitive():
    a = harness.ExperimentConfig.default()
    b = harness.ExperimentConfig.default()
    assert a.config_hash == b.config_hash
    c = harness.ExperimentConfig.default(cutoff=2.0)
    assert c.config_hash != a.config_hash


def test_wavefunction_presets():
    from mfqed.field_modes import LatticeSpec

    lat = LatticeSpec(1, 8, 2.0 * np.pi)
    uni = harness.initial_wavefunction(lat, {"preset": "uniform"})
    assert np.allclose(uni, uni[0])
    pw = harness.initial_wavefunction(lat, {"preset": "plane-wave", "mode": 2})
    x = lat.site_positions().ravel()
    assert np.allclose(pw, pw[0] * np.exp(2j * (x - x[0])), atol=1e-12)
    gp = harness.initial_wavefunction(
        lat, {"preset": "gaussian-packet", "center": np.pi, "width": 1.0, "boost": 1})
    assert abs(lat.dx * np.sum(np.abs(gp) ** 2) - 1.0) < 1e-12
    assert np.argmax(np.abs(gp)) == np.argmin(np.abs(x - np.pi))


def test_decoupled_config_beta_identically_zero(tmp_path):
    # no photon modes, no potential, uniform condensate: free dynamics
    # preserves the product structure, so every beta part stays zero
    cfg = harness.ExperimentConfig.from_dict({
        "name": "decoupled",
        "cutoff": 0.5,
        "potential": {"kind": "none"},
        "particle_numbers": [3],
        "n_photon_max": 0,
        "initial_wavefunction": {"preset": "uniform"},
        "initial_alpha": [],
        "time": {"t_max": 0.3, "dt": 1e-3, "sample_stride": 100},
    })
    record = harness.run_comparison(cfg, out_dir=str(tmp_path))
    assert len(record.rows) == 4
    for row in record.rows:
        assert row.beta_a <= 1e-12
        assert row.beta_b == 0.0
        assert row.beta_c <= 1e-12
        assert row.tr_dist_particle <= 1e-10
        assert row.leakage == 0.0  # no photon modes, nothing truncated


def test_run_comparison_csv_contract(tmp_path):
    cfg = harness.ExperimentConfig.from_dict(TINY)
    record = harness.run_comparison(cfg, out_dir=str(tmp_path))
    csv_path = tmp_path / "tiny.csv"
    text = csv_path.read_text().splitlines()
    assert text[0] == CSV_COLUMNS
    assert len(text) == 1 + len(record.rows)
    assert (tmp_path / "tiny.summary.json").exists()
    summary = json.loads((tmp_path / "tiny.summary.json").read_text())
    assert summary["config_hash"] == cfg.config_hash


def test_run_comparison_deterministic_bytes(tmp_path):
    cfg = harness.ExperimentConfig.from_dict(TINY)
    a = harness.run_comparison(cfg, out_dir=str(tmp_path / "a"))
    b = harness.run_comparison(cfg, out_dir=str(tmp_path / "b"))
    assert (tmp_path / "a" / "tiny.csv").read_bytes() == (tmp_path / "b" / "tiny.csv").read_bytes()


def test_checkpoint_resume_reproduces_rows(tmp_path):
    cfg = harness.ExperimentConfig.from_dict(TINY)
    full_dir = tmp_path / "full"
    harness.run_comparison(cfg, out_dir=str(full_dir), checkpoint=True)
    ckpt = full_dir / "tiny.N2.s1.ckpt.npz"
    assert ckpt.exists()
    resumed = harness.run_comparison(cfg, resume_path=str(ckpt))
    full_rows = (full_dir / "tiny.csv").read_text().splitlines()[1:]
    resumed_rows = [r.csv_row() for r in resumed.rows]
    assert resumed_rows == full_rows[-len(resumed_rows):]


def test_checkpoint_hash_mismatch_rejected(tmp_path):
    cfg = harness.ExperimentConfig.from_dict(TINY)
    harness.run_comparison(cfg, out_dir=str(tmp_path), checkpoint=True)
    other = harness.ExperimentConfig.from_dict({**TINY, "cutoff": 1.2})
    with pytest.raises(ConfigurationError):
        harness.load_checkpoint(str(tmp_path / "tiny.N2.s0.ckpt.npz"), other)


def test_sweep_requires_three_particle_numbers():
    cfg = harness.ExperimentConfig.from_dict({"particle_numbers": [4]})
    with pytest.raises(ConfigurationError):
        harness.sweep_N(cfg)


def test_analyze_rows_synthetic():
    # hand-built rows with known slope -1 and clean monotone trend
    cfg = harness.ExperimentConfig.default(cutoff=2.0)
    rows = []
    for n in (2, 4, 8):
        for t in (0.0, 0.5, 1.0):
            beta_c = 1.0 / n
            tr = 0.5 * np.exp(0.2 * t) / n
            rows.append(BetaReport(t=t, n_particles=n, cutoff=2.0,
                                   beta_a=0.1 / n * t, beta_b=0.05 / n * t,
                                   beta_c=beta_c, tr_dist_particle=tr,
                                   tr_dist_photon=tr, e_m=1.0, e_many_per_n=1.0,
                                   gauge_residual=0.0, norm_phi=1.0, norm_psi=1.0,
                                   leakage=0.0))
    s = harness.analyze_rows(rows, cfg)
    assert s["beta_c0_loglog_slope"] == pytest.approx(-1.0, abs=1e-12)
    assert all(s["monotone_trace_particle"].values())
    assert s["trace_particle_slope"]["0.5"] == pytest.approx(-1.0, abs=1e-12)
    assert s["envelope_max_ratio"] <= 1.0


def test_self_check_passes_and_faults_detected():
    report = harness.self_check()
    assert report.passed, report.text()
    gauge = harness.self_check(inject_fault="gauge")
    failed = {c.name for c in gauge.checks if not c.passed}
    assert failed == {"coulomb_gauge"}
    herm = harness.self_check(inject_fault="hermiticity")
    failed = {c.name for c in herm.checks if not c.passed}
    assert failed == {"hamiltonian_hermiticity"}


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _write_cfg(tmp_path, payload):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(payload))
    return str(path)


def test_cli_print_config(tmp_path, capsys):
    path = _write_cfg(tmp_path, TINY)
    rc = cli.main(["compare", "--config", path, "--print-config"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["name"] == "tiny"
    assert out["lattice"]["sites"] == 8


def test_cli_bad_config_exit_code(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    rc = cli.main(["check", "--config", str(path)])
    assert rc == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error_code"] == 2


def test_cli_resource_cap_exit_code(tmp_path, capsys):
    path = _write_cfg(tmp_path, {**TINY, "dimension_cap": 10})
    rc = cli.main(["compare", "--config", str(path), "--out", str(tmp_path / "o")])
    assert rc == 3


def test_cli_self_check_failure_exit_code(monkeypatch, capsys):
    broken = harness.CheckReport([harness.CheckResult("probe", False, "boom", 0.0)])
    monkeypatch.setattr(harness, "self_check", lambda cfg: broken)
    rc = cli.main(["check"])
    assert rc == 5
    assert "FAIL" in capsys.readouterr().out


def test_cli_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    from mfqed.errors import NumericalError

    def explode(*a, **kw):
        raise NumericalError("solver blew up")

    monkeypatch.setattr(harness, "run_comparison", explode)
    path = _write_cfg(tmp_path, TINY)
    rc = cli.main(["compare", "--config", path, "--out", str(tmp_path / "o")])
    assert rc == 4
    err = json.loads(capsys.readouterr().err)
    assert err["error_code"] == 4 and err["kind"] == "numerical"


def test_cli_ms_and_qm_evolve(tmp_path, capsys):
    path = _write_cfg(tmp_path, TINY)
    assert cli.main(["ms-evolve", "--config", path, "--out", str(tmp_path / "ms")]) == 0
    ms_csv = (tmp_path / "ms" / "tiny.ms.csv").read_text().splitlines()
    assert ms_csv[0] == ("t,E_M,E_kinetic,E_potential,E_field,gauge_residual,"
                         "norm_phi,phi_H2,A_H2,E_H1")
    assert len(ms_csv) == 4
    assert cli.main(["qm-evolve", "--config", path, "--out", str(tmp_path / "qm")]) == 0
    qm_csv = (tmp_path / "qm" / "tiny.qm.csv").read_text().splitlines()
    assert qm_csv[0] == "t,N,E_many_per_N,norm_Psi,leakage"
    assert len(qm_csv) == 4


def test_cli_compare_writes_outputs(tmp_path, capsys):
    path = _write_cfg(tmp_path, TINY)
    rc = cli.main(["compare", "--config", path, "--out", str(tmp_path / "out")])
    assert rc == 0
    assert (tmp_path / "out" / "tiny.csv").exists()
    assert (tmp_path / "out" / "tiny.summary.json").exists()


def test_parallel_sweep_matches_serial(tmp_path):
    cfg_payload = {
        "name": "par",
        "particle_numbers": [2, 3, 4],
        "time": {"t_max": 0.05, "dt": 1e-3, "sample_stride": 50},
    }
    cfg = harness.ExperimentConfig.from_dict(cfg_payload)
    serial = harness.sweep_N(cfg, out_dir=str(tmp_path / "s"), threads=1)
    parallel = harness.sweep_N(cfg, out_dir=str(tmp_path / "p"), threads=3)
    assert (tmp_path / "s" / "par.csv").read_bytes() == (tmp_path / "p" / "par.csv").read_bytes()
    assert serial.summary["beta_c0_loglog_slope"] == pytest.approx(
        parallel.summary["beta_c0_loglog_slope"], rel=1e-12)
