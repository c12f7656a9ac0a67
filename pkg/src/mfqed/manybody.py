"""Exact quantum dynamics on (symmetric N-boson lattice) x (truncated Fock).

The particle sector uses the occupation-number representation over the
M^d lattice sites, so bosonic symmetry is built in.  The Hamiltonian

    H = sum_j (-i grad_j - A(x_j)/sqrt(N))^2
        + (1/N) sum_{j<k} v(x_j - x_k) + H_f

is stored as a sum of Kronecker-product terms (particle factor) x
(photon factor); a matrix-vector product reshapes the state to a
(dim_particle, dim_photon) block and applies the factors on either side.
The kinetic term and the minimal-coupling derivative are spectral
(circulant matrices built from the exact momentum sums), and the cross
term is symmetrized as (-i grad) . A + A . (-i grad) so hermiticity is
exact by construction.

Spectral convention: the discrete Laplacian carries the full momentum
grid including the Nyquist mode -M/2 * dk (whose |k|^2 is real), while
first-derivative operators drop the Nyquist mode (its sine transform
vanishes on the lattice).  The mean-field solver uses the same
convention, making quantum/classical energy comparisons exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from ._occupations import index_map, occupations_with_total
from .errors import ConfigurationError, ResourceCapError
from .krylov import expm_apply
from .fock import (
    CoherentAmplitude,
    FockBasis,
    all_annihilators,
    coherent_state,
    field_energy_diagonal,
)
from .field_modes import LatticeSpec, ModeSet


# ---------------------------------------------------------------------------
# one-body spectral operators
# ---------------------------------------------------------------------------

def kinetic_onebody(lattice: LatticeSpec) -> np.ndarray:
    """Spectral -Laplacian in the position basis: K_xy = (1/S) sum_k |k|^2
    cos(k.(x-y)).  Real symmetric circulant, exact for lattice functions."""
    pos = lattice.site_positions()
    k = lattice.momentum_indices() * lattice.dk
    ksq = np.einsum("nd,nd->n", k, k)
    r = pos[:, None, :] - pos[None, :, :]
    return np.einsum("n,xyn->xy", ksq, np.cos(r @ k.T)) / lattice.n_sites


def momentum_onebody(lattice: LatticeSpec) -> list[np.ndarray]:
    """Spectral momentum components (-i d/dx_i) as hermitian matrices,
    (P_i)_xy = (i/S) sum_k k_i sin(k.(x-y)); Nyquist terms vanish."""
    pos = lattice.site_positions()
    k = lattice.momentum_indices() * lattice.dk
    r = pos[:, None, :] - pos[None, :, :]
    s = np.sin(r @ k.T)
    return [1j * np.einsum("n,xyn->xy", k[:, i], s) / lattice.n_sites
            for i in range(lattice.dimension)]


def displacement_table(lattice: LatticeSpec) -> np.ndarray:
    """disp[i, j] = flat site index of (x_i - x_j) mod L, for potential
    lookups v(x_i - x_j)."""
    m = lattice.sites_per_axis
    idx = (lattice.site_positions() / lattice.dx).round().astype(int)
    diff = (idx[:, None, :] - idx[None, :, :]) % m
    flat = np.zeros(diff.shape[:2], dtype=int)
    for a in range(lattice.dimension):
        flat = flat * m + diff[:, :, a]
    return flat


# ---------------------------------------------------------------------------
# particle basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParticleBasis:
    lattice: LatticeSpec
    n_particles: int
    occupations: np.ndarray = field(repr=False)
    _lookup: dict = field(repr=False)
    _cache: dict = field(repr=False, default_factory=dict)

    @classmethod
    def build(cls, lattice: LatticeSpec, n_particles: int) -> "ParticleBasis":
        if n_particles < 1:
            raise ConfigurationError(f"need at least one particle, got {n_particles}")
        occ = occupations_with_total(lattice.n_sites, n_particles)
        return cls(lattice, n_particles, occ, index_map(occ))

    @property
    def dim(self) -> int:
        return len(self.occupations)

    def hop_arrays(self):
        """(src, dst, amp, x, y) arrays describing all b_x^dagger b_y
        transitions with x != y; cached."""
        if "hop" in self._cache:
            return self._cache["hop"]
        occ = self.occupations
        nsites = self.lattice.n_sites
        src, dst, amp, xs, ys = [], [], [], [], []
        for s in range(self.dim):
            n = occ[s]
            occupied = np.nonzero(n)[0]
            for y in occupied:
                ny = n[y]
                for x in range(nsites):
                    if x == y:
                        continue
                    t = n.copy()
                    t[y] -= 1
                    t[x] += 1
                    dst.append(self._lookup[tuple(int(v) for v in t)])
                    src.append(s)
                    amp.append(np.sqrt(ny * (n[x] + 1.0)))
                    xs.append(x)
                    ys.append(y)
        out = (
            np.asarray(src, dtype=np.int64),
            np.asarray(dst, dtype=np.int64),
            np.asarray(amp, dtype=float),
            np.asarray(xs, dtype=np.int64),
            np.asarray(ys, dtype=np.int64),
        )
        self._cache["hop"] = out
        return out

    def second_quantize_onebody(self, t_matrix: np.ndarray) -> sp.csr_matrix:
        """sum_{x,y} T_xy b_x^dagger b_y as a sparse matrix on the basis."""
        src, dst, amp, xs, ys = self.hop_arrays()
        vals = t_matrix[xs, ys] * amp
        mat = sp.coo_matrix((vals, (dst, src)), shape=(self.dim, self.dim), dtype=complex)
        diag = self.occupations @ np.diag(t_matrix)
        return (mat + sp.diags(diag.astype(complex))).tocsr()

    def annihilation_map(self, site: int, smaller: "ParticleBasis") -> sp.csr_matrix:
        """b_site as a map from this basis to the (N-1)-particle basis."""
        key = ("ann", site)
        if key in self._cache:
            return self._cache[key]
        occ = self.occupations
        src = np.nonzero(occ[:, site] > 0)[0]
        vals = np.sqrt(occ[src, site].astype(float))
        dst = np.empty(len(src), dtype=np.int64)
        for i, s in enumerate(src):
            t = occ[s].copy()
            t[site] -= 1
            dst[i] = smaller._lookup[tuple(int(v) for v in t)]
        mat = sp.csr_matrix((vals, (dst, src)), shape=(smaller.dim, self.dim), dtype=complex)
        self._cache[key] = mat
        return mat

    def density_fourier_diagonal(self, q: np.ndarray) -> np.ndarray:
        """Diagonal of rho_q = sum_x e^{i q.x} n_x on the basis."""
        phases = np.exp(1j * self.lattice.site_positions() @ np.asarray(q))
        return self.occupations @ phases


# ---------------------------------------------------------------------------
# composite state
# ---------------------------------------------------------------------------

@dataclass
class CompositeState:
    particle_basis: ParticleBasis
    fock_basis: FockBasis
    vec: np.ndarray
    t: float = 0.0

    @property
    def dim(self) -> int:
        return self.particle_basis.dim * self.fock_basis.dim

    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))

    def as_matrix(self) -> np.ndarray:
        return self.vec.reshape(self.particle_basis.dim, self.fock_basis.dim)

    def photon_leakage(self) -> float:
        """Weight on the top photon-number sector (truncation monitor);
        zero when the photon sector has no modes."""
        if self.fock_basis.modes.n_modes == 0:
            return 0.0
        s = self.as_matrix()
        mask = self.fock_basis.total_occupation() == self.fock_basis.n_max
        return float(np.sum(np.abs(s[:, mask]) ** 2))


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

@dataclass
class HamiltonianSpec:
    n_particles: int
    v_table: np.ndarray | None    # (n_sites,) displacement-indexed values, or None
    cutoff: float
    dimension_cap: int = 5_000_000
    symmetrize_cross: bool = True


def validate_pair_potential(lattice: LatticeSpec, v_table: np.ndarray):
    """The pair potential must be real, nonnegative and even."""
    v = np.asarray(v_table, dtype=float)
    if v.shape != (lattice.n_sites,):
        raise ConfigurationError(
            f"v_table must have one entry per site, got shape {v.shape}"
        )
    if np.any(v < 0):
        raise ConfigurationError("pair potential must be nonnegative")
    # disp[0, j] is the flat index of -x_j, so v[disp[0]] tabulates v(-x)
    disp = displacement_table(lattice)
    if not np.allclose(v, v[disp[0]], atol=1e-14):
        raise ConfigurationError("pair potential must be even under x -> -x")


class PauliFierzOperator:
    """Sparse Kronecker-sum form of the minimally coupled Hamiltonian."""

    def __init__(self, pb: ParticleBasis, fb: FockBasis, spec: HamiltonianSpec):
        dim = pb.dim * fb.dim
        if dim > spec.dimension_cap:
            raise ResourceCapError(
                f"composite dimension {pb.dim} x {fb.dim} = {dim} exceeds cap "
                f"{spec.dimension_cap}"
            )
        if pb.n_particles != spec.n_particles:
            raise ConfigurationError("particle basis particle number differs from the Hamiltonian settings")
        self.pb, self.fb, self.spec = pb, fb, spec
        lattice = pb.lattice
        modes = fb.modes
        n = float(spec.n_particles)

        self.kinetic_2q = pb.second_quantize_onebody(kinetic_onebody(lattice).astype(complex))
        self.pair_diag = self._pair_diagonal(spec.v_table)
        self.hf_diag = field_energy_diagonal(fb)

        self.cross_terms = []   # (particle csr, photon factor, photon factor transposed)
        self.diam_terms = []    # (particle diagonal, photon csr, its transpose)
        if modes.n_modes:
            self._build_coupling(modes, n)

    # -- assembly ----------------------------------------------------------

    def _pair_diagonal(self, v_table):
        pb = self.pb
        if v_table is None:
            return np.zeros(pb.dim)
        validate_pair_potential(pb.lattice, v_table)
        disp = displacement_table(pb.lattice)
        v_sites = np.asarray(v_table, dtype=float)[disp]      # (S, S)
        occ = pb.occupations.astype(float)
        quad = np.einsum("si,ij,sj->s", occ, v_sites, occ)
        linear = occ @ np.diag(v_sites)
        return (quad - linear) / (2.0 * self.spec.n_particles)

    def _coupling_coefficients(self, modes: ModeSet):
        """c[m, i, x]: coefficient of a_m in the i-th field component at x."""
        return modes.coupling_amplitudes(self.pb.lattice.site_positions())

    def _build_coupling(self, modes: ModeSet, n: float):
        pb, fb = self.pb, self.fb
        lattice = pb.lattice
        grads = momentum_onebody(lattice)
        # scalar-field reduction couples to the first derivative component
        p_ops = grads if lattice.n_components == lattice.dimension else [grads[0]]
        c = self._coupling_coefficients(modes)            # (n_modes, n_comp, S)
        ann = all_annihilators(fb)

        for m in range(modes.n_modes):
            b = np.zeros((lattice.n_sites, lattice.n_sites), dtype=complex)
            for i, p in enumerate(p_ops):
                d = c[m, i]
                if self.spec.symmetrize_cross:
                    b += p * d[None, :] + d[:, None] * p
                else:
                    b += 2.0 * d[:, None] * p
            b2q = pb.second_quantize_onebody(b) * (-1.0 / np.sqrt(n))
            a_m = ann[m]
            self.cross_terms.append((b2q, a_m, a_m.T.tocsr()))
            if self.spec.symmetrize_cross:
                adj = b2q.conj().T.tocsr()
            else:
                # naive expansion pairs a_m^dagger with the conjugated (not
                # adjoint) coefficient; genuinely non-hermitian on a lattice
                adj = b2q.conj().tocsr()
            adag = a_m.conj().T.tocsr()
            self.cross_terms.append((adj, adag, adag.T.tocsr()))

        # diamagnetic sum_x n_x (x) A(x).A(x) / N, grouped by the momentum
        # transfer q of each ladder bilinear
        groups = {}
        g = np.sqrt(modes.weight) * modes.kappa_t / np.sqrt(2.0 * modes.abs_k)
        edot = modes.eps @ modes.eps.T
        for m1 in range(modes.n_modes):
            for m2 in range(modes.n_modes):
                coef = g[m1] * g[m2] * edot[m1, m2] / n
                if coef == 0.0:
                    continue
                k1, k2 = modes.k_index[m1], modes.k_index[m2]
                combos = (
                    (tuple(k1 + k2), ann[m1] @ ann[m2]),
                    (tuple(k1 - k2), ann[m1] @ ann[m2].conj().T),
                    (tuple(-k1 + k2), ann[m1].conj().T @ ann[m2]),
                    (tuple(-k1 - k2), ann[m1].conj().T @ ann[m2].conj().T),
                )
                for q_idx, mat in combos:
                    acc = groups.setdefault(q_idx, sp.csr_matrix((fb.dim, fb.dim), dtype=complex))
                    groups[q_idx] = acc + coef * mat
        for q_idx, mat in sorted(groups.items()):
            q = np.asarray(q_idx, dtype=float) * lattice.dk
            rho = self.pb.density_fourier_diagonal(q)
            mat = mat.tocsr()
            self.diam_terms.append((rho, mat, mat.T.tocsr()))

    # -- application -------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.pb.dim * self.fb.dim

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        s = vec.reshape(self.pb.dim, self.fb.dim)
        out = self.kinetic_2q @ s
        out += self.pair_diag[:, None] * s
        out += s * self.hf_diag[None, :]
        for p, _f, f_t in self.cross_terms:
            out += (p @ s) @ f_t
        for rho, _mq, mq_t in self.diam_terms:
            out += (rho[:, None] * s) @ mq_t
        return np.asarray(out).ravel()

    def expectation(self, vec: np.ndarray) -> float:
        return float(np.real(np.vdot(vec, self.matvec(vec))))

    def to_sparse(self) -> sp.csr_matrix:
        if self.dim > 200_000:
            raise ResourceCapError(f"refusing dense-ish assembly at dimension {self.dim}")
        i_f = sp.identity(self.fb.dim, dtype=complex, format="csr")
        i_p = sp.identity(self.pb.dim, dtype=complex, format="csr")
        h = sp.kron(self.kinetic_2q, i_f)
        h = h + sp.kron(sp.diags(self.pair_diag.astype(complex)), i_f)
        h = h + sp.kron(i_p, sp.diags(self.hf_diag.astype(complex)))
        for p, f, _ft in self.cross_terms:
            h = h + sp.kron(p, f)
        for rho, mq, _mqt in self.diam_terms:
            h = h + sp.kron(sp.diags(rho), mq)
        return h.tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def hermiticity_defect(self, probes: int = 4, seed: int = 7) -> float:
        """max |<u, Hv> - <Hu, v>| over random probe pairs, normalized by
        the probe energy scale."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            u = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
            v = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
            u /= np.linalg.norm(u)
            v /= np.linalg.norm(v)
            lhs = np.vdot(u, self.matvec(v))
            rhs = np.vdot(self.matvec(u), v)
            worst = max(worst, abs(lhs - rhs))
        return worst


def assemble_pauli_fierz(pb: ParticleBasis, fb: FockBasis, spec: HamiltonianSpec) -> PauliFierzOperator:
    if pb.lattice is not fb.modes.lattice and pb.lattice != fb.modes.lattice:
        raise ConfigurationError("particle and photon bases live on different lattices")
    return PauliFierzOperator(pb, fb, spec)


# ---------------------------------------------------------------------------
# initial states
# ---------------------------------------------------------------------------

def symmetric_power_state(pb: ParticleBasis, phi_flat: np.ndarray) -> np.ndarray:
    """Amplitudes of phi^(tensor N) in the occupation basis:
    <n|phi^N> = sqrt(N!/prod n_x!) prod phi(x)^(n_x)."""
    phi = np.asarray(phi_flat, dtype=complex)
    if abs(np.linalg.norm(phi) - 1.0) > 1e-10:
        raise ConfigurationError("one-body wavefunction must be normalized")
    occ = pb.occupations
    log_multi = gammaln(pb.n_particles + 1) - gammaln(occ + 1.0).sum(axis=1)
    amps = np.exp(0.5 * log_multi) * np.prod(phi[None, :] ** occ, axis=1)
    return amps.astype(complex)


def product_initial_state(
    pb: ParticleBasis,
    fb: FockBasis,
    phi_flat: np.ndarray,
    alpha0: CoherentAmplitude,
    leakage_tol: float = 1e-6,
) -> CompositeState:
    """phi^(tensor N) x W(sqrt(N) alpha0) Omega."""
    photon = coherent_state(fb, np.sqrt(pb.n_particles) * alpha0, leakage_tol)
    particle = symmetric_power_state(pb, phi_flat)
    vec = np.outer(particle, photon).ravel()
    return CompositeState(pb, fb, vec, 0.0)


# ---------------------------------------------------------------------------
# Krylov propagation
# ---------------------------------------------------------------------------

def propagate(psi: CompositeState, h: PauliFierzOperator, dt: float, tol: float = 1e-9,
              m_max: int = 30) -> CompositeState:
    """exp(-i dt H) psi via the adaptive Lanczos scheme; norm and energy
    are preserved within the tolerance."""
    vec = expm_apply(h.matvec, psi.vec, dt, tol, m_max=m_max)
    return CompositeState(psi.particle_basis, psi.fock_basis, vec, psi.t + dt)


# ---------------------------------------------------------------------------
# reduced matrices
# ---------------------------------------------------------------------------

def reduced_density_particle(psi: CompositeState) -> np.ndarray:
    """gamma_xy = <Psi| b_x^dagger b_y |Psi> / N.

    Built as a Gram matrix of the annihilated blocks b_x Psi, so the
    result is hermitian positive semidefinite with trace exactly 1.
    """
    pb = psi.particle_basis
    smaller = _shrunk_basis(pb)
    s = psi.as_matrix()
    blocks = [pb.annihilation_map(x, smaller) @ s for x in range(pb.lattice.n_sites)]
    nsites = pb.lattice.n_sites
    gamma = np.empty((nsites, nsites), dtype=complex)
    for x in range(nsites):
        for y in range(x, nsites):
            val = np.vdot(blocks[x], blocks[y]) / pb.n_particles
            gamma[y, x] = val
            gamma[x, y] = np.conj(val)
    return gamma


_SHRUNK_CACHE: dict = {}


def _shrunk_basis(pb: ParticleBasis) -> ParticleBasis:
    key = (pb.lattice, pb.n_particles - 1)
    if key not in _SHRUNK_CACHE:
        if pb.n_particles == 1:
            # zero-particle space: single empty configuration
            occ = np.zeros((1, pb.lattice.n_sites), dtype=np.int32)
            _SHRUNK_CACHE[key] = ParticleBasis(pb.lattice, 0, occ, index_map(occ))
        else:
            _SHRUNK_CACHE[key] = ParticleBasis.build(pb.lattice, pb.n_particles - 1)
    return _SHRUNK_CACHE[key]


def reduced_energy_matrix_photon(psi: CompositeState) -> np.ndarray:
    """Energy-weighted photon matrix in its ell^2 embedding:

    gamma[m, m'] = |k_m|^(1/2) |k_m'|^(1/2) <a_m'^dagger a_m> / N.

    Tr gamma = <H_f>/N holds exactly; for a coherent photon sector the
    matrix is the rank-one |u><u| built from sqrt(w) |k|^(1/2) alpha.
    """
    fb = psi.fock_basis
    modes = fb.modes
    s = psi.as_matrix()
    nm = modes.n_modes
    gamma = np.zeros((nm, nm), dtype=complex)
    if nm == 0:
        return gamma
    ann = all_annihilators(fb)
    blocks = [s @ a.T for a in ann]
    root_k = np.sqrt(modes.abs_k)
    for m1 in range(nm):
        for m2 in range(m1, nm):
            val = root_k[m1] * root_k[m2] * np.vdot(blocks[m2], blocks[m1]) / psi.particle_basis.n_particles
            gamma[m1, m2] = val
            gamma[m2, m1] = np.conj(val)
    return gamma


def first_quantized_tensor(psi_particle: np.ndarray, pb: ParticleBasis) -> np.ndarray:
    """Occupation-basis vector -> symmetric first-quantized tensor
    psi(x_1, ..., x_N).  Exponential in N; only for small oracle tests."""
    nsites = pb.lattice.n_sites
    n = pb.n_particles
    out = np.zeros((nsites,) * n, dtype=complex)
    for amp, occ in zip(psi_particle, pb.occupations):
        if amp == 0:
            continue
        n_perms = np.exp(gammaln(n + 1) - gammaln(occ + 1.0).sum())
        weight = amp / np.sqrt(n_perms)
        sites = [x for x in range(nsites) for _ in range(occ[x])]
        for perm in set(permutations(sites)):
            out[perm] = weight
    return out


def composite_dimension(lattice: LatticeSpec, n_particles: int, n_modes: int, n_max: int) -> int:
    dp = comb(lattice.n_sites + n_particles - 1, n_particles)
    df = comb(n_modes + n_max, n_max)
    return dp * df
