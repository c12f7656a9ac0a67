import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gaussian_table, normalized_phi, random_amplitude, random_composite
from mfqed.errors import ConfigurationError
from mfqed.field_modes import LatticeSpec, build_mode_set
from mfqed.fock import CoherentAmplitude, FockBasis, ladder_operators
from mfqed import meanfield as mf
from mfqed.functionals import (
    BetaReport,
    beta_a,
    beta_b,
    beta_c,
    field_fluctuation_integral,
    initial_condition_values,
    lemma_bounds_check,
    rank_one_trace_bound,
    trace_norm_distance,
)
from mfqed.manybody import (
    CompositeState,
    HamiltonianSpec,
    ParticleBasis,
    assemble_pauli_fierz,
    product_initial_state,
    propagate,
    reduced_density_particle,
)


@pytest.fixture(scope="module")
def system():
    lat = LatticeSpec(1, 4, 2.0 * np.pi)
    modes = build_mode_set(lat, 1.2)
    fb = FockBasis.build(modes, 3)
    pb = ParticleBasis.build(lat, 2)
    return lat, modes, fb, pb


# ---------------------------------------------------------------------------
# beta_a
# ---------------------------------------------------------------------------

def test_beta_a_product_state_vanishes(system):
    lat, modes, fb, pb = system
    rng = np.random.default_rng(0)
    phi_flat = rng.normal(size=4) + 1j * rng.normal(size=4)
    phi_flat /= np.linalg.norm(phi_flat)
    psi = product_initial_state(pb, fb, phi_flat, CoherentAmplitude.zero(modes))
    assert beta_a(psi, phi_flat) <= 1e-13


def test_beta_a_orthogonal_is_one(system):
    lat, modes, fb, pb = system
    pb1 = ParticleBasis.build(lat, 1)
    phi = np.array([1.0, 0, 0, 0], dtype=complex)
    orth = np.array([0, 1.0, 0, 0], dtype=complex)
    psi = product_initial_state(pb1, fb, orth, CoherentAmplitude.zero(modes))
    assert beta_a(psi, phi) == pytest.approx(1.0, abs=1e-13)


def test_beta_a_equals_rdm_form(system):
    lat, modes, fb, pb = system
    rng = np.random.default_rng(17)
    for _ in range(5):
        psi = random_composite(pb, fb, rng)
        phi = rng.normal(size=4) + 1j * rng.normal(size=4)
        phi /= np.linalg.norm(phi)
        gamma = reduced_density_particle(psi)
        want = 1.0 - np.real(np.vdot(phi, gamma @ phi))
        got = beta_a(psi, phi)
        assert got == pytest.approx(want, abs=1e-12)
        assert 0.0 <= got <= 1.0


# ---------------------------------------------------------------------------
# beta_b
# ---------------------------------------------------------------------------

def test_beta_b_matching_coherent_sector(system):
    lat, modes, fb, pb = system
    alpha = CoherentAmplitude.from_dict(modes, {((1,), 0): 0.05, ((-1,), 0): 0.03j})
    phi_flat = np.full(4, 0.5, dtype=complex)
    psi = product_initial_state(pb, fb, phi_flat, alpha)
    assert beta_b(psi, alpha) <= 1e-6


def test_beta_b_single_photon_oracle(system):
    # direct ladder evaluation: one photon in mode m on top of vacuum gives
    # beta_b = w |k_m| * (1/(w N)) = |k_m|/N; at w = 1 this is w|k_m|/N
    lat, modes, fb, pb = system
    m = modes.index_of((1,), 0)
    occ = [0] * modes.n_modes
    occ[m] = 1
    photon = np.zeros(fb.dim, dtype=complex)
    photon[fb._lookup[tuple(occ)]] = 1.0
    particle = np.zeros(pb.dim, dtype=complex)
    particle[0] = 1.0
    psi = CompositeState(pb, fb, np.outer(particle, photon).ravel())
    got = beta_b(psi, CoherentAmplitude.zero(modes))
    assert modes.weight == pytest.approx(1.0)
    assert got == pytest.approx(modes.abs_k[m] / pb.n_particles, rel=1e-13)


def test_beta_b_single_photon_nonunit_weight():
    # same oracle at w != 1: the general value is |k_m|/N, independent of w
    lat = LatticeSpec(1, 8, np.pi)   # dk = 2, w = 2
    modes = build_mode_set(lat, 2.5)
    fb = FockBasis.build(modes, 2)
    pb = ParticleBasis.build(lat, 3)
    m = 0
    occ = [0] * modes.n_modes
    occ[m] = 1
    photon = np.zeros(fb.dim, dtype=complex)
    photon[fb._lookup[tuple(occ)]] = 1.0
    particle = np.zeros(pb.dim, dtype=complex)
    particle[0] = 1.0
    psi = CompositeState(pb, fb, np.outer(particle, photon).ravel())
    got = beta_b(psi, CoherentAmplitude.zero(modes))
    assert modes.weight == pytest.approx(2.0)
    assert got == pytest.approx(modes.abs_k[m] / pb.n_particles, rel=1e-13)


# ---------------------------------------------------------------------------
# beta_c
# ---------------------------------------------------------------------------

def test_beta_c_eigenstate_zero():
    lat = LatticeSpec(1, 8, 2.0 * np.pi)
    modes = build_mode_set(lat, 0.5, allow_empty=True)
    fb = FockBasis.build(modes, 0)
    pb = ParticleBasis.build(lat, 2)
    h = assemble_pauli_fierz(pb, fb, HamiltonianSpec(2, None, 0.5))
    x = lat.site_positions().ravel()
    phi = normalized_phi(lat, np.exp(1j * x))
    psi = product_initial_state(pb, fb, mf.flatten_phi(phi, lat),
                                CoherentAmplitude.zero(modes))
    assert beta_c(psi, h, 1.0) <= 1e-24  # E per particle = |k|^2 = 1


def test_beta_c_constant_along_trajectory(system):
    lat, modes, fb, pb = system
    v_tab = gaussian_table(lat, 1.0, 0.7)
    h = assemble_pauli_fierz(pb, fb, HamiltonianSpec(2, v_tab, 1.2))
    x = lat.site_positions().ravel()
    phi = normalized_phi(lat, 1 + 0.4 * np.exp(1j * x))
    alpha = CoherentAmplitude.from_dict(modes, {((1,), 0): 0.05})
    psi = product_initial_state(pb, fb, mf.flatten_phi(phi, lat), alpha)
    e_ref = h.expectation(psi.vec) / 2 + 0.3  # any fixed reference value
    tol = 1e-10
    b0 = beta_c(psi, h, e_ref)
    for _ in range(10):
        psi = propagate(psi, h, 0.05, tol)
    assert abs(beta_c(psi, h, e_ref) - b0) <= 10 * tol


# ---------------------------------------------------------------------------
# trace norm
# ---------------------------------------------------------------------------

def test_trace_norm_identical_and_orthogonal():
    e1 = np.zeros(4)
    e1[0] = 1.0
    e2 = np.zeros(4)
    e2[1] = 1.0
    p1 = np.outer(e1, e1)
    p2 = np.outer(e2, e2)
    assert trace_norm_distance(p1, p1) == 0.0
    assert trace_norm_distance(p1, p2) == pytest.approx(2.0, abs=1e-14)


def test_trace_norm_against_singular_values():
    rng = np.random.default_rng(12)
    for _ in range(10):
        a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        a = a + a.conj().T
        b = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        b = b + b.conj().T
        want = np.sum(np.linalg.svd(a - b, compute_uv=False))
        assert trace_norm_distance(a, b) == pytest.approx(want, rel=1e-12)


def test_trace_norm_rejects_non_hermitian():
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ConfigurationError):
        trace_norm_distance(a, np.zeros((2, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_rank_one_trace_inequality_random(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 8))
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    gamma = m @ m.conj().T
    gamma /= np.trace(gamma).real
    u = rng.normal(size=d) + 1j * rng.normal(size=d)
    u *= rng.uniform(0.1, 1.5) / np.linalg.norm(u)
    lhs, rhs = rank_one_trace_bound(gamma, u)
    assert lhs <= rhs + 1e-10


# ---------------------------------------------------------------------------
# trace-norm relation bounds on random composite states
# ---------------------------------------------------------------------------

def test_relation_bounds_product_coherent_all_zero(system):
    lat, modes, fb, pb = system
    rng = np.random.default_rng(6)
    phi = rng.normal(size=4) + 1j * rng.normal(size=4)
    phi /= np.linalg.norm(phi)
    alpha = CoherentAmplitude.from_dict(modes, {((1,), 0): 0.04})
    psi = product_initial_state(pb, fb, phi, alpha)
    rep = lemma_bounds_check(psi, phi, alpha)
    assert rep.passed
    assert rep.beta_a <= 1e-12
    assert rep.trace_dist_particle <= 1e-10
    assert rep.trace_dist_photon <= 1e-5


def test_relation_bounds_random_states(system):
    lat, modes, fb, pb = system
    rng = np.random.default_rng(123)
    for _ in range(60):
        psi = random_composite(pb, fb, rng)
        phi = rng.normal(size=4) + 1j * rng.normal(size=4)
        phi /= np.linalg.norm(phi)
        alpha = random_amplitude(modes, rng, scale=0.4)
        rep = lemma_bounds_check(psi, phi, alpha)
        assert rep.passed, rep.violations


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def test_initial_values_product_coherent(system):
    lat, modes, fb, pb = system
    v_tab = gaussian_table(lat, 1.0, 0.7)
    h = assemble_pauli_fierz(pb, fb, HamiltonianSpec(2, v_tab, 1.2))
    x = lat.site_positions().ravel()
    phi = normalized_phi(lat, 1 + 0.4 * np.exp(1j * x))
    alpha = CoherentAmplitude.from_dict(modes, {((1,), 0): 0.05})
    psi = product_initial_state(pb, fb, mf.flatten_phi(phi, lat), alpha)
    a4, e4 = mf.initial_fields_from_alpha(alpha)
    st_ = mf.EffectiveState(lat, modes, phi, a4, e4)
    e_m = mf.ms_energy(st_, mf.MSParams(1.2, v_tab, 1e-3)).total
    init = initial_condition_values(psi, mf.flatten_phi(phi, lat), alpha, h, e_m)
    assert init.a_n <= 1e-12
    assert init.b_n <= 1e-6
    assert init.c_n > 0
    assert init.c_n == pytest.approx(beta_c(psi, h, e_m), rel=1e-12)
    assert init.b_n == pytest.approx(beta_b(psi, alpha), abs=1e-9)


def test_initial_values_perturbed_particle_sector(system):
    lat, modes, fb, pb = system
    rng = np.random.default_rng(2)
    phi = rng.normal(size=4) + 1j * rng.normal(size=4)
    phi /= np.linalg.norm(phi)
    alpha = CoherentAmplitude.from_dict(modes, {((1,), 0): 0.05})
    psi = product_initial_state(pb, fb, phi, alpha)
    # mix in a non-condensed particle configuration, photons untouched
    s = psi.as_matrix().copy()
    photon_col = s[np.argmax(np.abs(s).sum(axis=1))].copy()
    bump = np.zeros_like(s)
    bump[0] = 0.3 * photon_col
    s = s + bump
    vec = s.ravel() / np.linalg.norm(s)
    psi2 = CompositeState(pb, fb, vec)
    h = assemble_pauli_fierz(pb, fb, HamiltonianSpec(2, None, 1.2))
    init = initial_condition_values(psi2, phi, alpha, h, 1.0)
    assert init.a_n > 1e-3
    assert init.b_n <= 1e-4


# ---------------------------------------------------------------------------
# position-space field fluctuation
# ---------------------------------------------------------------------------

def test_fluctuation_coherent_state_zero(system):
    lat, modes, fb, pb = system
    phi = np.full(4, 0.5, dtype=complex)
    alpha = CoherentAmplitude.from_dict(modes, {((1,), 0): 0.05, ((-1,), 0): 0.02j})
    psi = product_initial_state(pb, fb, phi, alpha)
    rep = field_fluctuation_integral(psi, alpha)
    assert rep.position_sum <= 1e-6


def test_fluctuation_single_photon_mode_sum(system):
    lat, modes, fb, pb = system
    m = modes.index_of((-1,), 0)
    occ = [0] * modes.n_modes
    occ[m] = 1
    photon = np.zeros(fb.dim, dtype=complex)
    photon[fb._lookup[tuple(occ)]] = 1.0
    particle = np.zeros(pb.dim, dtype=complex)
    particle[0] = 1.0
    psi = CompositeState(pb, fb, np.outer(particle, photon).ravel())
    rep = field_fluctuation_integral(psi, CoherentAmplitude.zero(modes))
    # explicit mode sum: (1/2) sum_m w |k_m| ||(a_m/sqrt(wN)) psi||^2
    want = 0.5 * modes.weight * modes.abs_k[m] / (modes.weight * pb.n_particles)
    # ... plus the vacuum has nothing else; all other modes contribute
    # (a_m psi = 0 except the occupied one) -- but the zero-point of the
    # occupied mode's neighbours vanishes on a one-photon state
    assert rep.half_mode_sum == pytest.approx(want, rel=1e-12)
    assert rep.position_sum == pytest.approx(rep.half_mode_sum, abs=1e-10)
    assert rep.position_sum <= rep.beta_b + 1e-10


def test_fluctuation_random_states_identity(system):
    lat, modes, fb, pb = system
    rng = np.random.default_rng(77)
    for _ in range(200):
        psi = random_composite(pb, fb, rng)
        alpha = random_amplitude(modes, rng, scale=0.3)
        rep = field_fluctuation_integral(psi, alpha)
        assert rep.position_sum == pytest.approx(rep.half_mode_sum, abs=1e-10)
        assert rep.position_sum <= rep.beta_b + 1e-10
        assert rep.beta_b == pytest.approx(beta_b(psi, alpha), rel=1e-12)


# ---------------------------------------------------------------------------
# report invariants
# ---------------------------------------------------------------------------

def _report(**kw):
    base = dict(t=0.0, n_particles=2, cutoff=1.2, beta_a=0.1, beta_b=0.2,
                beta_c=0.3, tr_dist_particle=0.1, tr_dist_photon=0.1,
                e_m=1.0, e_many_per_n=1.0, gauge_residual=0.0, norm_phi=1.0,
                norm_psi=1.0, leakage=0.0)
    base.update(kw)
    return BetaReport(**base)


def test_beta_report_validation():
    rep = _report()
    rep.validate()
    assert rep.beta == pytest.approx(0.6)
    with pytest.raises(ConfigurationError):
        _report(beta_a=-0.1).validate()
    with pytest.raises(ConfigurationError):
        _report(beta_b=np.nan).validate()
    row = rep.csv_row()
    assert row.split(",")[1] == "2"
    assert len(row.split(",")) == 15
