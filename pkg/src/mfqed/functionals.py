"""Condensation indicators and their trace-norm relations.

For a many-body state Psi, a condensate wavefunction phi and a coherent
amplitude alpha (with energy mode function u = |k|^(1/2) alpha):

    beta_a = 1 - <phi, gamma^(1,0) phi>        (charges outside phi)
    beta_b = sum_m w |k_m| || (a_m/sqrt(wN) - alpha_m) Psi ||^2
    beta_c = || (H/N - E_M) Psi ||^2           (energy-per-particle variance)

beta_a brackets the particle trace-norm distance via
beta_a <= Tr|gamma - |phi><phi|| <= sqrt(8 beta_a), and the photon-side
distance is controlled by 3 beta_b + 6 ||u|| sqrt(beta_b).  Both chains
rest on Tr|gamma - p| <= 2 ||gamma - p||_HS + Tr(gamma - p), valid for
any nonnegative gamma and rank-one nonnegative p (gamma - p then has at
most one negative eigenvalue).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigurationError
from .fock import CoherentAmplitude, all_annihilators, field_energy_diagonal, weyl_operator
from .manybody import (
    CompositeState,
    PauliFierzOperator,
    reduced_density_particle,
    reduced_energy_matrix_photon,
)


# ---------------------------------------------------------------------------
# the three functionals
# ---------------------------------------------------------------------------

def beta_a(psi: CompositeState, phi_flat: np.ndarray) -> float:
    """1 - <phi, gamma^(1,0) phi>, in [0, 1]."""
    phi = np.asarray(phi_flat, dtype=complex)
    if abs(np.linalg.norm(phi) - 1.0) > 1e-8:
        raise ConfigurationError("phi must be normalized")
    gamma = reduced_density_particle(psi)
    val = 1.0 - float(np.real(np.vdot(phi, gamma @ phi)))
    return _clip_nonneg(val, "beta_a")


def _mode_difference_blocks(psi: CompositeState, alpha: CoherentAmplitude):
    """Blocks D_m Psi with D_m = a_m / sqrt(w N) - alpha_m."""
    fb = psi.fock_basis
    modes = fb.modes
    s = psi.as_matrix()
    scale = 1.0 / np.sqrt(modes.weight * psi.particle_basis.n_particles)
    blocks = []
    for m, a in enumerate(all_annihilators(fb)):
        blocks.append(scale * (s @ a.T) - alpha.values[m] * s)
    return blocks


def beta_b(psi: CompositeState, alpha: CoherentAmplitude) -> float:
    """sum_m w |k_m| || (a_m/sqrt(wN) - alpha_m) Psi ||^2."""
    modes = psi.fock_basis.modes
    if modes.n_modes == 0:
        return 0.0
    total = 0.0
    for m, block in enumerate(_mode_difference_blocks(psi, alpha)):
        total += modes.weight * modes.abs_k[m] * float(np.sum(np.abs(block) ** 2))
    return total


def beta_c(psi: CompositeState, h: PauliFierzOperator, e_m: float) -> float:
    """|| (H/N - E_M) Psi ||^2."""
    resid = h.matvec(psi.vec) / psi.particle_basis.n_particles - e_m * psi.vec
    return float(np.real(np.vdot(resid, resid)))


def _clip_nonneg(val: float, name: str, floor: float = -1e-10) -> float:
    if val < floor:
        raise ConfigurationError(f"{name} = {val} is negative beyond numerical slack")
    return max(val, 0.0)


# ---------------------------------------------------------------------------
# trace norms and the rank-one bracket
# ---------------------------------------------------------------------------

def trace_norm_distance(gamma: np.ndarray, rho: np.ndarray, herm_tol: float = 1e-10) -> float:
    """Tr|gamma - rho| by hermitian eigendecomposition."""
    gamma = np.asarray(gamma)
    rho = np.asarray(rho)
    if gamma.shape != rho.shape:
        raise ConfigurationError(f"shape mismatch {gamma.shape} vs {rho.shape}")
    for mat, name in ((gamma, "gamma"), (rho, "rho")):
        defect = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
        scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 0.0)
        if defect > herm_tol * scale:
            raise ConfigurationError(f"{name} is not hermitian (defect {defect:.3g})")
    diff = gamma - rho
    diff = 0.5 * (diff + diff.conj().T)
    if diff.size == 0:
        return 0.0
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def rank_one_trace_bound(gamma: np.ndarray, u: np.ndarray) -> tuple[float, float]:
    """(Tr|gamma - |u><u||, 2 ||gamma - |u><u||_HS + Tr(gamma - |u><u|)).

    The first never exceeds the second for nonnegative gamma: subtracting
    the rank-one nonnegative |u><u| leaves at most one negative
    eigenvalue, which the Hilbert-Schmidt term absorbs twice over.
    """
    p = np.outer(u, np.conj(u))
    diff = gamma - p
    lhs = float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))
    rhs = 2.0 * float(np.linalg.norm(diff)) + float(np.real(np.trace(diff)))
    return lhs, rhs


# ---------------------------------------------------------------------------
# relation checks
# ---------------------------------------------------------------------------

@dataclass
class LemmaReport:
    beta_a: float
    beta_b: float
    trace_dist_particle: float
    trace_dist_photon: float
    particle_lower: float      # beta_a <= trace_dist_particle
    particle_upper: float      # trace_dist_particle <= sqrt(8 beta_a)
    photon_upper: float        # trace_dist_photon <= 3 b + 6 ||u|| sqrt(b)
    u_norm: float
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations


def lemma_bounds_check(psi: CompositeState, phi_flat: np.ndarray,
                       alpha: CoherentAmplitude, slack: float = 1e-10) -> LemmaReport:
    """Evaluate both trace-norm chains; violations are reported, not raised."""
    ba = beta_a(psi, phi_flat)
    bb = beta_b(psi, alpha)
    gamma_p = reduced_density_particle(psi)
    proj = np.outer(phi_flat, np.conj(phi_flat))
    td_particle = trace_norm_distance(gamma_p, proj)

    gamma_f = reduced_energy_matrix_photon(psi)
    u_flat = alpha.energy_mode_flat()
    td_photon = trace_norm_distance(gamma_f, np.outer(u_flat, np.conj(u_flat)))
    u_norm = float(np.linalg.norm(u_flat))

    upper_particle = np.sqrt(8.0 * ba)
    upper_photon = 3.0 * bb + 6.0 * u_norm * np.sqrt(bb)
    violations = []
    if ba > td_particle + slack:
        violations.append(("beta_a <= Tr|gamma-proj|", ba, td_particle))
    if td_particle > upper_particle + slack:
        violations.append(("Tr|gamma-proj| <= sqrt(8 beta_a)", td_particle, upper_particle))
    if td_photon > upper_photon + slack:
        violations.append(("photon trace bound", td_photon, upper_photon))
    return LemmaReport(ba, bb, td_particle, td_photon, ba, upper_particle,
                       upper_photon, u_norm, violations)


# ---------------------------------------------------------------------------
# initial data of the convergence statement
# ---------------------------------------------------------------------------

@dataclass
class InitialData:
    a_n: float
    b_n: float
    c_n: float

    def as_dict(self):
        return asdict(self)


def initial_condition_values(psi0: CompositeState, phi0_flat: np.ndarray,
                             alpha0: CoherentAmplitude, h: PauliFierzOperator,
                             e_m: float, leakage_tol: float = 1e-6) -> InitialData:
    """a_N = Tr|gamma^(1,0) - |phi0><phi0||,
    b_N = <W^-1 Psi, H_f W^-1 Psi> / N with W = W(sqrt(N) alpha0),
    c_N = beta_c at time zero."""
    n = psi0.particle_basis.n_particles
    gamma = reduced_density_particle(psi0)
    a_n = trace_norm_distance(gamma, np.outer(phi0_flat, np.conj(phi0_flat)))

    fb = psi0.fock_basis
    if fb.modes.n_modes:
        w_inv = weyl_operator(fb, (-np.sqrt(n)) * alpha0, leakage_tol)
        shifted = psi0.as_matrix() @ w_inv.mat.T
        hf = field_energy_diagonal(fb)
        b_n = float(np.sum(hf[None, :] * np.abs(shifted) ** 2)) / n
    else:
        b_n = 0.0
    c_n = beta_c(psi0, h, e_m)
    return InitialData(a_n, b_n, c_n)


# ---------------------------------------------------------------------------
# position-space field fluctuation
# ---------------------------------------------------------------------------

@dataclass
class FluctuationReport:
    position_sum: float
    half_mode_sum: float
    beta_b: float


def field_fluctuation_integral(psi: CompositeState, alpha: CoherentAmplitude) -> FluctuationReport:
    """sum_y dx^d || (E_plus(y)/sqrt(N) - E_plus_cl(y)) Psi ||^2.

    In the discrete algebra the position sum collapses by lattice
    orthogonality to (1/2) sum_m w |k_m| ||D_m Psi||^2, i.e. half of
    beta_b restricted to the retained modes (here: all of them).  Both
    values are reported; the inequality position_sum <= beta_b is then
    an identity with factor 1/2.
    """
    modes = psi.fock_basis.modes
    lattice = modes.lattice
    blocks = _mode_difference_blocks(psi, alpha)
    if modes.n_modes == 0:
        return FluctuationReport(0.0, 0.0, 0.0)

    positions = lattice.site_positions()
    # operator coefficients of D_m inside the E_plus difference
    coef = 1j * modes.weight * modes.kappa_t * np.sqrt(modes.abs_k / 2.0)
    phases = np.exp(1j * positions @ modes.k.T)          # (n_sites, n_modes)
    dv = lattice.dx**lattice.dimension
    pos_sum = 0.0
    for y in range(lattice.n_sites):
        for c in range(modes.n_components):
            acc = None
            for m, block in enumerate(blocks):
                term = (coef[m] * modes.eps[m, c] * phases[y, m]) * block
                acc = term if acc is None else acc + term
            pos_sum += dv * float(np.sum(np.abs(acc) ** 2))

    mode_sums = np.array([float(np.sum(np.abs(b) ** 2)) for b in blocks])
    half_mode = 0.5 * float(np.sum(modes.weight * modes.abs_k * mode_sums))
    bb = 2.0 * half_mode
    return FluctuationReport(pos_sum, half_mode, bb)


# ---------------------------------------------------------------------------
# per-sample report row
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "t,N,Lambda,beta_a,beta_b,beta_c,beta,tr_dist_particle,tr_dist_photon,"
    "E_M,E_many_per_N,gauge_residual,norm_phi,norm_Psi,leakage"
)


@dataclass
class BetaReport:
    t: float
    n_particles: int
    cutoff: float
    beta_a: float
    beta_b: float
    beta_c: float
    tr_dist_particle: float
    tr_dist_photon: float
    e_m: float
    e_many_per_n: float
    gauge_residual: float
    norm_phi: float
    norm_psi: float
    leakage: float

    @property
    def beta(self) -> float:
        return self.beta_a + self.beta_b + self.beta_c

    def validate(self):
        vals = [self.beta_a, self.beta_b, self.beta_c, self.tr_dist_particle,
                self.tr_dist_photon, self.gauge_residual, self.leakage]
        if not all(np.isfinite(v) for v in vals):
            raise ConfigurationError(f"non-finite entry in report at t={self.t}")
        if any(v < 0 for v in vals):
            raise ConfigurationError(f"negative entry in report at t={self.t}")
        if not (np.isfinite(self.e_m) and np.isfinite(self.e_many_per_n)):
            raise ConfigurationError(f"non-finite energy in report at t={self.t}")

    def csv_row(self) -> str:
        cells = [repr(float(self.t)), str(int(self.n_particles)), repr(float(self.cutoff))]
        for v in (self.beta_a, self.beta_b, self.beta_c, self.beta,
                  self.tr_dist_particle, self.tr_dist_photon, self.e_m,
                  self.e_many_per_n, self.gauge_residual, self.norm_phi,
                  self.norm_psi, self.leakage):
            cells.append(repr(float(v)))
        return ",".join(cells)
