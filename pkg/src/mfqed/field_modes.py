"""Photon mode geometry on a periodic lattice.

Momentum grid {2*pi*n/L : n in [-M/2, M/2)}^d with a sharp ultraviolet
cutoff 0 < |k| <= Lambda, polarization bases, transverse projectors, and
the cutoff-profile values

    kappa_t(k) = (2*pi)^(-d/2) * 1_{|k| <= Lambda},
    eta_t(k)   = |k|^(-1) * kappa_t(k).

Continuum integrals become quadrature sums with uniform weight
w = (Delta k)^d, so every field formula is a literal mode sum.  The zero
momentum mode is excluded from the photon sector: the mode amplitude
alpha = |k|^(-1/2) u would be singular there, and the mode carries no
field energy.

In d = 3 each momentum carries two real transverse polarization vectors;
in d < 3 the field is reduced to a scalar (one polarization, eps = 1,
projector = identity).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic simulation box: M sites per axis, physical side length L."""

    dimension: int
    sites_per_axis: int
    length: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ConfigurationError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.sites_per_axis < 2 or self.sites_per_axis % 2 != 0:
            raise ConfigurationError(
                f"sites_per_axis must be even and >= 2, got {self.sites_per_axis}"
            )
        if not self.length > 0:
            raise ConfigurationError(f"length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.sites_per_axis

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def n_sites(self) -> int:
        return self.sites_per_axis**self.dimension

    @property
    def volume(self) -> float:
        return self.length**self.dimension

    @property
    def weight(self) -> float:
        """Momentum quadrature weight w = (Delta k)^d."""
        return self.dk**self.dimension

    @property
    def n_components(self) -> int:
        """Field components: 3 in d=3, scalar field otherwise."""
        return 3 if self.dimension == 3 else 1

    def site_positions(self) -> np.ndarray:
        """(n_sites, d) array of positions x = n * dx, C-order enumeration."""
        m = self.sites_per_axis
        grids = np.meshgrid(*[np.arange(m)] * self.dimension, indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=1)
        return idx * self.dx

    def momentum_indices(self) -> np.ndarray:
        """(n_sites, d) integer grid n with components in [-M/2, M/2)."""
        m = self.sites_per_axis
        axis = np.concatenate([np.arange(0, m // 2), np.arange(-m // 2, 0)])
        axis = np.sort(axis)
        grids = np.meshgrid(*[axis] * self.dimension, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def fft_momenta(self) -> list[np.ndarray]:
        """Per-axis momentum values in numpy FFT order."""
        m = self.sites_per_axis
        return [2.0 * np.pi * np.fft.fftfreq(m, d=self.dx) for _ in range(self.dimension)]


def cutoff_norms(cutoff: float) -> tuple[float, float]:
    """Continuum d=3 reference norms of the cutoff profiles.

    ||kappa||_2^2 = Lambda^3 / (6 pi^2) and ||eta||_2^2 = Lambda / (2 pi^2).
    """
    if not cutoff > 0:
        raise ConfigurationError(f"cutoff must be positive, got {cutoff}")
    return cutoff**3 / (6.0 * np.pi**2), cutoff / (2.0 * np.pi**2)


def transverse_projector(k: np.ndarray, n_components: int = 3) -> np.ndarray:
    """P_ij(k) = delta_ij - k_i k_j / |k|^2 for a 3-component field.

    For the scalar reduction (n_components == 1) the projector is the
    1x1 identity: a scalar field has no longitudinal part.
    """
    if n_components == 1:
        return np.ones((1, 1))
    k = np.asarray(k, dtype=float)
    k2 = float(k @ k)
    if k2 == 0.0:
        raise ConfigurationError("transverse projector undefined at k = 0")
    return np.eye(len(k)) - np.outer(k, k) / k2


def polarization_vectors(k: np.ndarray) -> np.ndarray:
    """Two real orthonormal transverse polarization vectors for k in R^3.

    Deterministic rule: Gram-Schmidt the coordinate axis least aligned
    with k (ties broken by lowest axis index), second vector by cross
    product.  Same axis is picked for k and -k, so eps_1(-k) = eps_1(k)
    and eps_2(-k) = -eps_2(k).
    """
    k = np.asarray(k, dtype=float)
    khat = k / np.linalg.norm(k)
    axis = int(np.argmin(np.abs(khat)))
    e = np.zeros(3)
    e[axis] = 1.0
    eps1 = e - (e @ khat) * khat
    eps1 /= np.linalg.norm(eps1)
    eps2 = np.cross(khat, eps1)
    return np.stack([eps1, eps2])


@dataclass(frozen=True)
class ModeSet:
    """Discretized photon modes (k, lambda) with 0 < |k| <= cutoff.

    Arrays are indexed by the flat mode index m.  `eps` holds the real
    polarization vector of each mode as an (n_modes, n_components) block.
    """

    lattice: LatticeSpec
    cutoff: float
    k_index: np.ndarray          # (n_modes, d) integer momentum indices
    k: np.ndarray                # (n_modes, d) momenta
    pol: np.ndarray              # (n_modes,) polarization label
    eps: np.ndarray              # (n_modes, n_components) real unit vectors
    _lookup: dict = field(repr=False, default_factory=dict)

    @property
    def n_modes(self) -> int:
        return self.k.shape[0]

    @property
    def n_components(self) -> int:
        return self.lattice.n_components

    @property
    def weight(self) -> float:
        return self.lattice.weight

    @property
    def abs_k(self) -> np.ndarray:
        return np.linalg.norm(self.k, axis=1) if self.n_modes else np.zeros(0)

    @property
    def kappa_t(self) -> np.ndarray:
        """Cutoff profile values kappa_t(k_m); constant on the mode set."""
        d = self.lattice.dimension
        return np.full(self.n_modes, (2.0 * np.pi) ** (-d / 2.0))

    @property
    def eta_t(self) -> np.ndarray:
        return self.kappa_t / self.abs_k

    def c_lambda(self) -> float:
        """Discrete vacuum commutator sum_m w |kappa_t|^2 / (2|k_m|).

        Converges to Lambda^2/(4 pi^2) under d=3 grid refinement.
        """
        if self.n_modes == 0:
            return 0.0
        return float(np.sum(self.weight * self.kappa_t**2 / (2.0 * self.abs_k)))

    def index_of(self, k_index, pol: int) -> int:
        key = (tuple(int(n) for n in np.atleast_1d(k_index)), int(pol))
        try:
            return self._lookup[key]
        except KeyError:
            raise ConfigurationError(f"mode {key} is not in the mode set") from None

    def negation_index(self) -> np.ndarray:
        """Map m -> index of the mode (-k_m, same polarization label)."""
        return np.array(
            [self.index_of(-self.k_index[m], self.pol[m]) for m in range(self.n_modes)],
            dtype=int,
        )

    def coupling_amplitudes(self, positions: np.ndarray) -> np.ndarray:
        """c[m, i, x] = sqrt(w) kappa_t(k_m) (2|k_m|)^(-1/2) eps_m^i exp(i k_m x).

        These are the coefficients of the discrete annihilators a_m in the
        vector potential at the given positions.
        """
        phases = np.exp(1j * positions @ self.k.T)  # (n_pos, n_modes)
        g = np.sqrt(self.weight) * self.kappa_t / np.sqrt(2.0 * self.abs_k)
        return np.einsum("m,mi,xm->mix", g, self.eps, phases)


def build_mode_set(lattice: LatticeSpec, cutoff: float, allow_empty: bool = False) -> ModeSet:
    """Enumerate the lattice momenta with 0 < |k| <= cutoff and attach
    polarizations.

    The cutoff must sit strictly inside the Brillouin zone
    (cutoff < pi*M/L); this also guarantees the set is closed under
    k -> -k.  An empty mode set is a configuration error unless
    `allow_empty` is set (used for deliberately decoupled scenarios).
    """
    if not cutoff > 0:
        raise ConfigurationError(f"cutoff must be positive, got {cutoff}")
    zone_edge = np.pi * lattice.sites_per_axis / lattice.length
    if cutoff >= zone_edge:
        raise ConfigurationError(
            f"cutoff {cutoff} reaches the Brillouin zone edge {zone_edge:.6g}; "
            "refine the lattice or lower the cutoff"
        )

    idx = lattice.momentum_indices()
    k = idx * lattice.dk
    absk = np.linalg.norm(k, axis=1)
    keep = (absk > 0) & (absk <= cutoff)
    idx, k = idx[keep], k[keep]

    order = np.lexsort(tuple(idx[:, c] for c in reversed(range(idx.shape[1]))))
    order = order[np.argsort(np.einsum("nd,nd->n", k[order], k[order]), kind="stable")]
    idx, k = idx[order], k[order]

    if lattice.dimension == 3:
        k_index = np.repeat(idx, 2, axis=0)
        k_rep = np.repeat(k, 2, axis=0)
        pol = np.tile([0, 1], len(k))
        eps = np.concatenate([polarization_vectors(kv) for kv in k]) if len(k) else np.zeros((0, 3))
    else:
        k_index, k_rep = idx, k
        pol = np.zeros(len(k), dtype=int)
        eps = np.ones((len(k), 1))

    if len(k_rep) == 0 and not allow_empty:
        raise ConfigurationError(
            f"no lattice momenta below cutoff {cutoff} (smallest nonzero |k| is "
            f"{lattice.dk:.6g}); pass allow_empty=True for a decoupled run"
        )

    lookup = {
        (tuple(int(n) for n in k_index[m]), int(pol[m])): m for m in range(len(k_rep))
    }
    return ModeSet(lattice, float(cutoff), k_index, k_rep, pol, eps, lookup)


def gamma_perp_kernel(modes: ModeSet, displacements: np.ndarray) -> np.ndarray:
    """Discrete transverse kernel
    gamma[x, i, j] = sum_k w |kappa_t|^2 |k|^(-1) e^{i k x} P_ij(k)
    evaluated on the given displacement vectors (one polarization sum
    folded in via sum_lambda eps^i eps^j = P_ij).
    """
    n_comp = modes.n_components
    out = np.zeros((len(displacements), n_comp, n_comp), dtype=complex)
    if modes.n_modes == 0:
        return out
    phases = np.exp(1j * displacements @ modes.k.T)  # (n_disp, n_modes)
    coef = modes.weight * modes.kappa_t**2 / modes.abs_k
    out = np.einsum("m,mi,mj,xm->xij", coef, modes.eps, modes.eps, phases)
    return out
