"""Dimension-generic coverage: the quantum side with the full d=3
polarization structure, and the d=2 scalar reduction end to end."""

import numpy as np
import pytest

from conftest import gaussian_table, normalized_phi
from mfqed.field_modes import LatticeSpec, build_mode_set
from mfqed.fock import CoherentAmplitude, FockBasis
from mfqed import functionals as fn
from mfqed import manybody as mb
from mfqed import meanfield as mf


@pytest.fixture(scope="module")
def d3_system():
    lat = LatticeSpec(3, 4, 2.0 * np.pi)
    modes = build_mode_set(lat, 1.2)
    fb = FockBasis.build(modes, 2)
    pb = mb.ParticleBasis.build(lat, 1)
    x = lat.site_positions()
    phi = normalized_phi(lat, np.exp(1j * x[:, 0]) * (1 + 0.3 * np.cos(x[:, 1])))
    alpha = CoherentAmplitude.from_dict(
        modes, {((0, 0, 1), 0): 0.05, ((1, 0, 0), 1): 0.03 + 0.02j})
    return lat, modes, fb, pb, phi, alpha


def test_d3_product_coherent_energy_identity(d3_system):
    # exercises the transverse polarization sums through the full
    # Hamiltonian: <H>/N = E_M + c_Lambda/N for v = 0
    lat, modes, fb, pb, phi, alpha = d3_system
    h = mb.assemble_pauli_fierz(pb, fb, mb.HamiltonianSpec(1, None, 1.2))
    assert h.hermiticity_defect() <= 1e-12
    psi = mb.product_initial_state(pb, fb, mf.flatten_phi(phi, lat), alpha)
    a4, e4 = mf.initial_fields_from_alpha(alpha)
    st = mf.EffectiveState(lat, modes, phi, a4, e4)
    e_m = mf.ms_energy(st, mf.MSParams(1.2, None, 1e-3)).total
    got = h.expectation(psi.vec)
    assert got == pytest.approx(e_m + modes.c_lambda(), abs=1e-5)


def test_d3_propagation_and_relation_bounds(d3_system):
    lat, modes, fb, pb, phi, alpha = d3_system
    h = mb.assemble_pauli_fierz(pb, fb, mb.HamiltonianSpec(1, None, 1.2))
    psi = mb.product_initial_state(pb, fb, mf.flatten_phi(phi, lat), alpha)
    e0 = h.expectation(psi.vec)
    psi = mb.propagate(psi, h, 0.2, 1e-10)
    assert abs(psi.norm() - 1.0) <= 1e-9
    assert abs(h.expectation(psi.vec) - e0) <= 1e-9
    rep = fn.lemma_bounds_check(psi, mf.flatten_phi(phi, lat), alpha)
    assert rep.passed, rep.violations
    gamma = mb.reduced_energy_matrix_photon(psi)
    assert np.linalg.eigvalsh(gamma).min() >= -1e-12


def test_d2_scalar_reduction_runs():
    # d=2: scalar field, one polarization, coupled through the first
    # derivative component; mode set, solver and quantum assembly all run
    lat = LatticeSpec(2, 4, 2.0 * np.pi)
    modes = build_mode_set(lat, 1.2)
    assert modes.n_components == 1
    assert np.all(modes.pol == 0)
    assert modes.n_modes == 4  # |k| = 1 momenta

    x = lat.site_positions()
    phi = normalized_phi(lat, np.exp(1j * x[:, 0]))
    alpha = CoherentAmplitude.from_dict(modes, {((0, 1), 0): 0.05})
    a4, e4 = mf.initial_fields_from_alpha(alpha)
    state = mf.EffectiveState(lat, modes, phi, a4, e4)
    params = mf.MSParams(1.2, gaussian_table(lat, 0.5, 0.9), 2e-3)
    e0 = mf.ms_energy(state, params).total
    for _ in range(50):
        state = mf.ms_step(state, params)
    assert abs(mf.ms_energy(state, params).total - e0) / abs(e0) <= 1e-6
    assert state.reality_defect() <= 1e-12

    fb = FockBasis.build(modes, 2)
    pb = mb.ParticleBasis.build(lat, 1)
    h = mb.assemble_pauli_fierz(pb, fb, mb.HamiltonianSpec(1, None, 1.2))
    assert h.hermiticity_defect() <= 1e-12
    psi = mb.product_initial_state(pb, fb, mf.flatten_phi(phi, lat), alpha)
    got = h.expectation(psi.vec)
    # v = 0 on the quantum side here, so compare against the free E_M
    e_m_free = mf.ms_energy(mf.EffectiveState(lat, modes, phi, a4, e4),
                            mf.MSParams(1.2, None, 2e-3)).total
    assert got == pytest.approx(e_m_free + modes.c_lambda(), abs=1e-5)
