"""Occupation-truncated photon Fock space.

Basis states are occupation vectors (n_m) over the mode set with total
photon number sum(n_m) <= n_max, enumerated graded-lexicographically.
Ladder operators follow the continuum-to-discrete dictionary

    a(k_m, lambda_m)  <->  a_m / sqrt(w),       w = (Delta k)^d,

so [a(k), a*(k')] = delta(k - k') becomes [a_m, a_m'] = delta_mm' / w and
every continuum integral becomes a plain mode sum.  The canonical
commutation relations hold exactly on the "safe subspace" sum(n) <=
n_max - 1; all identities involving products of truncated operators are
exact there and degrade only on the top occupation sector.

The Weyl operator is built by unitary exponentiation of the
anti-hermitian generator on the truncated space, which keeps
W(f)^dagger = W(-f) exact; truncation quality is monitored through the
Poisson tail of the total displacement power.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import gammaincc

from ._occupations import index_map, occupations_up_to
from .errors import ConfigurationError, TruncationError
from .field_modes import ModeSet, gamma_perp_kernel


@dataclass(frozen=True)
class FockBasis:
    modes: ModeSet
    n_max: int
    occupations: np.ndarray = field(repr=False)
    _lookup: dict = field(repr=False)

    @classmethod
    def build(cls, modes: ModeSet, n_max: int) -> "FockBasis":
        if n_max < 0:
            raise ConfigurationError(f"n_max must be nonnegative, got {n_max}")
        occ = occupations_up_to(modes.n_modes, n_max)
        return cls(modes, n_max, occ, index_map(occ))

    @property
    def dim(self) -> int:
        return len(self.occupations)

    @property
    def vacuum_index(self) -> int:
        return 0

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.vacuum_index] = 1.0
        return v

    def total_occupation(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    def sector_mask(self, n_total_max: int) -> np.ndarray:
        """Boolean mask of basis states with total occupation <= n_total_max."""
        return self.total_occupation() <= n_total_max

    def top_sector_weight(self, vec: np.ndarray) -> float:
        """Probability weight sitting on the highest retained sector; this is
        the truncation-leakage monitor for evolved states.  Without photon
        modes there is nothing truncated and the monitor reads zero."""
        if self.modes.n_modes == 0:
            return 0.0
        mask = self.total_occupation() == self.n_max
        return float(np.sum(np.abs(vec[mask]) ** 2))


@dataclass
class PhotonOperator:
    """Matrix on the Fock basis with an algebraic tag.

    tag: "hermitian" | "ladder" | "unitary".  `mat` is scipy sparse for
    the ladder-built operators and dense for exponentials.
    """

    mat: object
    tag: str
    basis: FockBasis

    def dagger(self) -> "PhotonOperator":
        return PhotonOperator(self.mat.conj().T, self.tag, self.basis)

    def toarray(self) -> np.ndarray:
        return self.mat.toarray() if sp.issparse(self.mat) else np.asarray(self.mat)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.mat @ vec

    def hermiticity_defect(self) -> float:
        a = self.toarray()
        return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


@dataclass(frozen=True)
class CoherentAmplitude:
    """Per-mode complex amplitude f(k_m, lambda_m) in continuum
    normalization: ||f||^2 = sum_m w |f_m|^2.

    The discrete ladder displacement of mode m is sqrt(w) * f_m.
    """

    modes: ModeSet
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.modes.n_modes:
            raise ConfigurationError(
                f"amplitude has {len(self.values)} entries for {self.modes.n_modes} modes"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("coherent amplitude must be finite")

    @classmethod
    def zero(cls, modes: ModeSet) -> "CoherentAmplitude":
        return cls(modes, np.zeros(modes.n_modes, dtype=complex))

    @classmethod
    def from_dict(cls, modes: ModeSet, entries: dict) -> "CoherentAmplitude":
        """entries: {(k_index_tuple, pol): complex}"""
        vals = np.zeros(modes.n_modes, dtype=complex)
        for (kidx, pol), v in entries.items():
            vals[modes.index_of(kidx, pol)] = v
        return cls(modes, vals)

    def __mul__(self, scalar) -> "CoherentAmplitude":
        return CoherentAmplitude(self.modes, self.values * scalar)

    __rmul__ = __mul__

    @property
    def norm_sq(self) -> float:
        return float(self.modes.weight * np.sum(np.abs(self.values) ** 2))

    def ladder_displacements(self) -> np.ndarray:
        """theta_m = sqrt(w) f_m, the displacement in discrete-ladder units."""
        return np.sqrt(self.modes.weight) * self.values

    def energy_mode_values(self) -> np.ndarray:
        """u(k_m) = |k_m|^(1/2) f_m, the energy mode function values."""
        return np.sqrt(self.modes.abs_k) * self.values

    def energy_mode_flat(self) -> np.ndarray:
        """ell^2 embedding sqrt(w) u_m used for trace-norm comparisons."""
        return np.sqrt(self.modes.weight) * self.energy_mode_values()


def ladder_operators(basis: FockBasis, mode: int) -> tuple[PhotonOperator, PhotonOperator]:
    """Discrete annihilation/creation pair (a_m, a_m^dagger) of one mode."""
    if not 0 <= mode < basis.modes.n_modes:
        raise ConfigurationError(f"mode index {mode} outside 0..{basis.modes.n_modes - 1}")
    occ = basis.occupations
    src = np.nonzero(occ[:, mode] > 0)[0]
    rows = np.empty(len(src), dtype=np.int64)
    vals = np.sqrt(occ[src, mode].astype(float))
    for i, s in enumerate(src):
        target = occ[s].copy()
        target[mode] -= 1
        rows[i] = basis._lookup[tuple(int(v) for v in target)]
    a = sp.csr_matrix((vals, (rows, src)), shape=(basis.dim, basis.dim), dtype=complex)
    return (
        PhotonOperator(a, "ladder", basis),
        PhotonOperator(a.conj().T.tocsr(), "ladder", basis),
    )


def all_annihilators(basis: FockBasis) -> list[sp.csr_matrix]:
    return [ladder_operators(basis, m)[0].mat for m in range(basis.modes.n_modes)]


def field_energy_operator(basis: FockBasis) -> PhotonOperator:
    """H_f = sum_m |k_m| a_m^dagger a_m, diagonal and nonnegative."""
    diag = basis.occupations @ basis.modes.abs_k if basis.modes.n_modes else np.zeros(basis.dim)
    return PhotonOperator(sp.diags(diag.astype(float), format="csr", dtype=complex), "hermitian", basis)


def field_energy_diagonal(basis: FockBasis) -> np.ndarray:
    if basis.modes.n_modes == 0:
        return np.zeros(basis.dim)
    return (basis.occupations @ basis.modes.abs_k).astype(float)


@dataclass
class FieldOperators:
    """Frequency-split field operators at one lattice position.

    Components are lists over the n_components field directions:
    A_plus[i] annihilates, A_minus[i] = A_plus[i]^dagger, A[i] hermitian;
    E_* are the electric-field analogues with weight sqrt(|k|/2) and the
    +i / -i frequency phases.
    """

    A_plus: list
    A_minus: list
    A: list
    E_plus: list
    E_minus: list
    E: list


def field_operators(basis: FockBasis, position: np.ndarray) -> FieldOperators:
    """Quantized vector potential and electric field at a lattice position.

    A_plus^i(x) = sum_m sqrt(w) kappa_t(k_m) (2|k_m|)^(-1/2) eps_m^i
                  e^{i k_m x} a_m,
    E_plus^i(x) = i sum_m sqrt(w) kappa_t(k_m) sqrt(|k_m|/2) eps_m^i
                  e^{i k_m x} a_m.
    """
    modes = basis.modes
    pos = np.atleast_1d(np.asarray(position, dtype=float))
    ann = all_annihilators(basis)
    ncomp = modes.n_components
    zero = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)

    a_plus, e_plus = [], []
    for i in range(ncomp):
        acc_a, acc_e = zero.copy(), zero.copy()
        for m in range(modes.n_modes):
            phase = np.exp(1j * float(modes.k[m] @ pos))
            g = np.sqrt(modes.weight) * modes.kappa_t[m] * modes.eps[m, i] * phase
            acc_a = acc_a + (g / np.sqrt(2.0 * modes.abs_k[m])) * ann[m]
            acc_e = acc_e + 1j * g * np.sqrt(modes.abs_k[m] / 2.0) * ann[m]
        a_plus.append(acc_a.tocsr())
        e_plus.append(acc_e.tocsr())

    a_minus = [op.conj().T.tocsr() for op in a_plus]
    e_minus = [op.conj().T.tocsr() for op in e_plus]
    wrap = lambda m, tag: PhotonOperator(m, tag, basis)
    return FieldOperators(
        A_plus=[wrap(m, "ladder") for m in a_plus],
        A_minus=[wrap(m, "ladder") for m in a_minus],
        A=[wrap((p + q).tocsr(), "hermitian") for p, q in zip(a_plus, a_minus)],
        E_plus=[wrap(m, "ladder") for m in e_plus],
        E_minus=[wrap(m, "ladder") for m in e_minus],
        E=[wrap((p + q).tocsr(), "hermitian") for p, q in zip(e_plus, e_minus)],
    )


def eta_position_kernel(modes: ModeSet, displacements: np.ndarray) -> np.ndarray:
    """eta(x) = (2 pi)^(-d/2) sum_k w eta_t(k) e^{i k x} on the lattice."""
    d = modes.lattice.dimension
    if modes.n_modes == 0:
        return np.zeros(len(displacements), dtype=complex)
    # sum runs over momenta, not (k, lambda) pairs: pick one polarization per k
    _, first = np.unique(modes.k_index, axis=0, return_index=True)
    ks = modes.k[np.sort(first)]
    eta_vals = (2.0 * np.pi) ** (-d / 2.0) / np.linalg.norm(ks, axis=1)
    phases = np.exp(1j * displacements @ ks.T)
    return (2.0 * np.pi) ** (-d / 2.0) * modes.weight * phases @ eta_vals


def coherent_leakage(displacement_power: float, n_max: int) -> float:
    """1 - (norm captured by the truncated space) for an ideal coherent
    state with total displacement power S = sum_m |theta_m|^2.

    The total photon number is Poisson(S), so the lost weight is the
    upper tail P(X > n_max) = P(n_max + 1, S) (regularized lower
    incomplete gamma).
    """
    if displacement_power == 0.0:
        return 0.0
    return float(1.0 - gammaincc(n_max + 1, displacement_power))


def suggest_n_max(displacement_power: float, tol: float) -> int:
    n = max(1, int(np.ceil(displacement_power)))
    while coherent_leakage(displacement_power, n) > tol and n < 10_000:
        n += 1
    return n


def weyl_generator(basis: FockBasis, f: CoherentAmplitude) -> sp.csr_matrix:
    theta = f.ladder_displacements()
    gen = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for m in range(basis.modes.n_modes):
        if theta[m] == 0:
            continue
        a, adag = ladder_operators(basis, m)
        gen = gen + theta[m] * adag.mat - np.conj(theta[m]) * a.mat
    return gen.tocsr()


def weyl_operator(basis: FockBasis, f: CoherentAmplitude, leakage_tol: float = 1e-6) -> PhotonOperator:
    """W(f) = exp(sum_m theta_m a_m^dagger - conj(theta_m) a_m) on the
    truncated space, exactly unitary by construction.

    Rejects displacements whose ideal coherent state would lose more than
    `leakage_tol` norm to the discarded sectors.
    """
    power = float(np.sum(np.abs(f.ladder_displacements()) ** 2))
    leak = coherent_leakage(power, basis.n_max)
    if leak > leakage_tol:
        raise TruncationError(
            f"coherent displacement power {power:.4g} leaks {leak:.3g} past "
            f"n_max={basis.n_max} (tolerance {leakage_tol:g}); "
            f"raise n_max to at least {suggest_n_max(power, leakage_tol)}",
            suggested_n_max=suggest_n_max(power, leakage_tol),
        )
    gen = weyl_generator(basis, f).toarray()
    herm = 1j * gen  # hermitian; W = exp(-i * herm)
    evals, evecs = scipy.linalg.eigh(herm)
    w = (evecs * np.exp(-1j * evals)) @ evecs.conj().T
    return PhotonOperator(w, "unitary", basis)


def coherent_state(basis: FockBasis, f: CoherentAmplitude, leakage_tol: float = 1e-6) -> np.ndarray:
    """Normalized coherent state W(f) Omega on the truncated space."""
    return weyl_operator(basis, f, leakage_tol).mat[:, basis.vacuum_index].copy()


@dataclass
class WeylMoments:
    """Closed-form expectation values on the coherent state W(sqrt(N) f) Omega,
    with the discrete commutator constant c_Lambda and the discrete
    transverse kernel gamma_perp in place of their continuum values.

    Conventions (positions is an (n_pos, d) array, i/j are field components):
      mean_A[x, i]        = < N^{-1/2} A^i(x) >      = A_cl^i(x)
      mean_A_sq[x]        = < N^{-1} A(x).A(x) >     = |A_cl(x)|^2 + c_Lambda/N
      mean_A_outer[x,y,i,j] = < N^{-1} A^i(x) A^j(y) >
                            = A_cl^i(x) A_cl^j(y) + gamma_perp_ij(x-y)/(2N)
      mean_Hf             = < N^{-1} H_f >           = ||u||^2
      mean_Hf_sq          = < N^{-2} H_f^2 >         = ||u||^4 + ||.^(1/2) u||^2/N
      mean_A_Hf[x, i]     = < N^{-3/2} A^i(x) H_f >  = A_cl^i(x) ||u||^2 - i E_plus^i(x)/N
      mean_A_sq_Hf[x]     = < N^{-2} A(x).A(x) H_f > = (|A_cl|^2 + c_Lambda/N) ||u||^2
                                                       - 2i A_cl(x).E_plus(x)/N
    """

    positions: np.ndarray
    mean_A: np.ndarray
    mean_A_sq: np.ndarray
    mean_A_outer: np.ndarray
    mean_Hf: float
    mean_Hf_sq: float
    mean_A_Hf: np.ndarray
    mean_A_sq_Hf: np.ndarray
    c_lambda: float
    gamma_perp: np.ndarray
    classical_A: np.ndarray
    classical_E_plus: np.ndarray


def classical_vector_potential(modes: ModeSet, values: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """A_cl^i(x) = sum_m w kappa_t (2|k|)^(-1/2) eps^i (e^{ikx} f_m + c.c.)."""
    out = np.zeros((len(positions), modes.n_components))
    if modes.n_modes == 0:
        return out
    phases = np.exp(1j * positions @ modes.k.T)
    coef = modes.weight * modes.kappa_t / np.sqrt(2.0 * modes.abs_k)
    half = np.einsum("m,mi,xm,m->xi", coef, modes.eps, phases, values)
    return 2.0 * half.real


def classical_e_plus(modes: ModeSet, values: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """E_plus^i(x) = i sum_m w kappa_t sqrt(|k|/2) eps^i e^{ikx} f_m."""
    out = np.zeros((len(positions), modes.n_components), dtype=complex)
    if modes.n_modes == 0:
        return out
    phases = np.exp(1j * positions @ modes.k.T)
    coef = modes.weight * modes.kappa_t * np.sqrt(modes.abs_k / 2.0)
    return 1j * np.einsum("m,mi,xm,m->xi", coef, modes.eps, phases, values)


def weyl_state_moments(alpha: CoherentAmplitude, n_particles: int, positions=None) -> WeylMoments:
    """Analytic moment table for the state W(sqrt(N) alpha) Omega."""
    modes = alpha.modes
    if positions is None:
        positions = modes.lattice.site_positions()
    positions = np.atleast_2d(positions)
    n = float(n_particles)

    u = alpha.energy_mode_values()
    u_sq = float(modes.weight * np.sum(np.abs(u) ** 2))
    u_half_sq = float(modes.weight * np.sum(modes.abs_k * np.abs(u) ** 2))
    c_lam = modes.c_lambda()

    a_cl = classical_vector_potential(modes, alpha.values, positions)
    e_plus = classical_e_plus(modes, alpha.values, positions)

    disp = positions[:, None, :] - positions[None, :, :]
    gamma = gamma_perp_kernel(modes, disp.reshape(-1, positions.shape[1]))
    gamma = gamma.reshape(len(positions), len(positions), modes.n_components, modes.n_components)

    a_outer = np.einsum("xi,yj->xyij", a_cl, a_cl) + gamma / (2.0 * n)
    a_sq = np.einsum("xi,xi->x", a_cl, a_cl) + c_lam / n
    a_hf = a_cl * u_sq - 1j * e_plus / n
    a_sq_hf = a_sq * u_sq - 2j * np.einsum("xi,xi->x", a_cl, e_plus) / n

    return WeylMoments(
        positions=positions,
        mean_A=a_cl,
        mean_A_sq=a_sq,
        mean_A_outer=a_outer,
        mean_Hf=u_sq,
        mean_Hf_sq=u_sq**2 + u_half_sq / n,
        mean_A_Hf=a_hf,
        mean_A_sq_Hf=a_sq_hf,
        c_lambda=c_lam,
        gamma_perp=gamma,
        classical_A=a_cl,
        classical_E_plus=e_plus,
    )


def fock_dimension(n_modes: int, n_max: int) -> int:
    return comb(n_modes + n_max, n_max)
