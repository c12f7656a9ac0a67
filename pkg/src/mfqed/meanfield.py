"""Maxwell-Schrodinger solver on the periodic lattice.

State: a normalized one-body wavefunction phi(x) together with the
transverse field amplitudes A~(k), E~(k) kept in Fourier representation
(numpy FFT grid order), where the cutoff convolution and the transverse
projection act as exact multiplications.  Real-space views follow the
symmetric Fourier convention

    A(x) = (2 pi)^(-d/2) sum_k (dk)^d e^{ikx} A~(k),

so (kappa * A)(x) = sum_k (dk)^d kappa_t(k) A~(k) e^{ikx}: band-limiting
to |k| <= Lambda.  The coupled system

    i dphi/dt = ((-i grad - kappa*A)^2 + v*|phi|^2) phi
    dA/dt = -E,   dE/dt = -Lap A - P_transverse (kappa * j)
    j = 2 (Im(conj(phi) grad phi) - |phi|^2 (kappa*A))

is advanced by Strang splitting: a phi half-step with frozen fields, an
exact per-mode harmonic rotation of (A~, E~) driven by the frozen
transverse source (evaluated at the half-rotated field for a clean
second order), and a second phi half-step.  The phi half-step itself
splits the mean-field phase (exact: |phi| is invariant under it) around
the minimal-coupling kinetic flow, which is applied by a Lanczos
exponential since (-i grad - A)^2 is diagonal in neither basis.

First derivatives drop the Nyquist mode, the Laplacian keeps it; this
matches the many-body module so the two sides share an identical energy
functional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .field_modes import LatticeSpec, ModeSet
from .fock import CoherentAmplitude
from .krylov import expm_apply


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def _grid_shape(lattice: LatticeSpec) -> tuple:
    return (lattice.sites_per_axis,) * lattice.dimension


def wavenumber_grids(lattice: LatticeSpec) -> list[np.ndarray]:
    """Per-axis momentum grids in FFT order, broadcast to the full grid."""
    m = lattice.sites_per_axis
    axis = 2.0 * np.pi * np.fft.fftfreq(m, d=lattice.dx)
    grids = np.meshgrid(*[axis] * lattice.dimension, indexing="ij")
    return grids


def derivative_grids(lattice: LatticeSpec) -> list[np.ndarray]:
    """First-derivative wavenumbers: Nyquist component zeroed."""
    m = lattice.sites_per_axis
    axis = 2.0 * np.pi * np.fft.fftfreq(m, d=lattice.dx)
    axis[m // 2] = 0.0
    grids = np.meshgrid(*[axis] * lattice.dimension, indexing="ij")
    return grids


def laplacian_grid(lattice: LatticeSpec) -> np.ndarray:
    ks = wavenumber_grids(lattice)
    return sum(k**2 for k in ks)


def cutoff_mask(lattice: LatticeSpec, cutoff: float) -> np.ndarray:
    """Boolean grid: 0 < |k| <= cutoff."""
    ksq = laplacian_grid(lattice)
    return (ksq > 0) & (np.sqrt(ksq) <= cutoff)


def gradient(lattice: LatticeSpec, f: np.ndarray) -> list[np.ndarray]:
    ft = np.fft.fftn(f.reshape(_grid_shape(lattice)))
    return [np.fft.ifftn(1j * k * ft).ravel() for k in derivative_grids(lattice)]


def momentum_apply(lattice: LatticeSpec, f: np.ndarray) -> list[np.ndarray]:
    """(-i d/dx_i) f for each axis, spectral."""
    ft = np.fft.fftn(f.reshape(_grid_shape(lattice)))
    return [np.fft.ifftn(k * ft).ravel() for k in derivative_grids(lattice)]


def laplace_apply(lattice: LatticeSpec, f: np.ndarray) -> np.ndarray:
    ft = np.fft.fftn(f.reshape(_grid_shape(lattice)))
    return np.fft.ifftn(laplacian_grid(lattice) * ft).ravel()


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

@dataclass
class MSParams:
    cutoff: float
    v_table: np.ndarray | None
    dt: float
    splitting_order: int = 2
    tolerance: float = 1e-12

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.splitting_order != 2:
            raise ConfigurationError("only the second-order Strang scheme is implemented")


@dataclass
class EffectiveState:
    """(phi, A~, E~) with phi physically normalized and the fields stored
    per component on the FFT momentum grid."""

    lattice: LatticeSpec
    modes: ModeSet
    phi: np.ndarray          # (n_sites,) complex
    a_four: np.ndarray       # (n_components,) + grid
    e_four: np.ndarray
    t: float = 0.0

    def copy(self) -> "EffectiveState":
        return EffectiveState(self.lattice, self.modes, self.phi.copy(),
                              self.a_four.copy(), self.e_four.copy(), self.t)

    def phi_norm(self) -> float:
        return float(np.sqrt(self.lattice.dx**self.lattice.dimension
                             * np.sum(np.abs(self.phi) ** 2)))

    def phi_flat(self) -> np.ndarray:
        """ell^2-normalized view used by the quantum-side comparisons."""
        return self.phi * self.lattice.dx ** (self.lattice.dimension / 2.0)

    def field_real(self, four: np.ndarray) -> np.ndarray:
        """Real-space view of a Fourier-stored field, (n_comp, n_sites)."""
        lat = self.lattice
        scale = (2.0 * np.pi) ** (lat.dimension / 2.0) / lat.dx**lat.dimension
        out = np.stack([np.fft.ifftn(c).ravel() for c in four])
        return scale * out

    def a_real(self) -> np.ndarray:
        return self.field_real(self.a_four)

    def e_real(self) -> np.ndarray:
        return self.field_real(self.e_four)

    def gauge_residual(self) -> float:
        """max_k |k . A~(k)|; identically zero for the scalar reduction."""
        if self.lattice.n_components == 1:
            return 0.0
        ks = wavenumber_grids(self.lattice)
        dot = sum(k * c for k, c in zip(ks, self.a_four))
        return float(np.max(np.abs(dot)))

    def reality_defect(self) -> float:
        return float(max(np.max(np.abs(self.a_real().imag)),
                         np.max(np.abs(self.e_real().imag)), 0.0))


def flatten_phi(phi: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    return np.asarray(phi, dtype=complex) * lattice.dx ** (lattice.dimension / 2.0)


# ---------------------------------------------------------------------------
# alpha <-> (A, E)
# ---------------------------------------------------------------------------

def _mode_grid_indices(modes: ModeSet, negate=False) -> tuple:
    m = modes.lattice.sites_per_axis
    idx = (-modes.k_index if negate else modes.k_index) % m
    return tuple(idx[:, a] for a in range(modes.lattice.dimension))


def initial_fields_from_alpha(alpha: CoherentAmplitude) -> tuple[np.ndarray, np.ndarray]:
    """Transverse fields with A~(k) = sum_lambda (2|k|)^(-1/2)
    [eps(k) alpha(k) + eps(-k) conj(alpha(-k))] and the matching E~."""
    modes = alpha.modes
    lat = modes.lattice
    shape = (lat.n_components,) + _grid_shape(lat)
    a_four = np.zeros(shape, dtype=complex)
    e_four = np.zeros(shape, dtype=complex)
    if modes.n_modes == 0:
        return a_four, e_four
    pos_idx = _mode_grid_indices(modes)
    neg_idx = _mode_grid_indices(modes, negate=True)
    absk = modes.abs_k
    for c in range(lat.n_components):
        a_amp = modes.eps[:, c] * alpha.values / np.sqrt(2.0 * absk)
        e_amp = 1j * modes.eps[:, c] * np.sqrt(absk / 2.0) * alpha.values
        np.add.at(a_four[c], pos_idx, a_amp)
        np.add.at(a_four[c], neg_idx, np.conj(a_amp))
        np.add.at(e_four[c], pos_idx, e_amp)
        np.add.at(e_four[c], neg_idx, np.conj(e_amp))
    return a_four, e_four


def alpha_from_fields(modes: ModeSet, a_four: np.ndarray, e_four: np.ndarray,
                      longitudinal_tol: float = 1e-10):
    """Energy mode function u(k, lambda) = eps . (|k| A~ - i E~)/sqrt(2)
    and the amplitude alpha = |k|^(-1/2) u.

    Rejects fields with a longitudinal component above tolerance.
    """
    lat = modes.lattice
    if lat.n_components == 3:
        ks = wavenumber_grids(lat)
        kmax = float(np.max(np.abs(ks[0])))
        for four in (a_four, e_four):
            dot = sum(k * c for k, c in zip(ks, four))
            defect = float(np.max(np.abs(dot)))
            scale = kmax * float(np.max(np.abs(four)))
            if defect > longitudinal_tol * max(scale, 1.0):
                raise ConfigurationError(
                    f"field has longitudinal component (max |k.F| = {defect:.3g})"
                )
    if modes.n_modes == 0:
        u = np.zeros(0, dtype=complex)
        return u, CoherentAmplitude(modes, u)
    pos_idx = _mode_grid_indices(modes)
    a_vals = np.stack([a_four[c][pos_idx] for c in range(lat.n_components)])
    e_vals = np.stack([e_four[c][pos_idx] for c in range(lat.n_components)])
    combo = modes.abs_k[None, :] * a_vals - 1j * e_vals
    u = np.einsum("mc,cm->m", modes.eps, combo) / np.sqrt(2.0)
    alpha = CoherentAmplitude(modes, u / np.sqrt(modes.abs_k))
    return u, alpha


def field_energy_quadrature(lattice: LatticeSpec, a_four, e_four) -> float:
    """(1/2) sum_k w (|k|^2 |A~|^2 + |E~|^2): equals ||u||^2 for
    transverse real fields."""
    w = lattice.weight
    ksq = laplacian_grid(lattice)
    total = 0.0
    for c in range(a_four.shape[0]):
        total += np.sum(ksq * np.abs(a_four[c]) ** 2) + np.sum(np.abs(e_four[c]) ** 2)
    return float(0.5 * w * total)


# ---------------------------------------------------------------------------
# current and energy
# ---------------------------------------------------------------------------

def coupled_components(lattice: LatticeSpec) -> int:
    """Number of field components entering the minimal coupling; the
    scalar reduction couples to the first derivative only."""
    return lattice.n_components


def current_density(lattice: LatticeSpec, phi: np.ndarray, a_kappa_real: np.ndarray) -> np.ndarray:
    """j_i(x) = 2 ( Im(conj(phi) d_i phi)(x) - |phi|^2(x) A_i(x) ).

    `a_kappa_real` is the already band-limited real-space field with one
    row per coupled component.
    """
    grads = gradient(lattice, phi)[: coupled_components(lattice)]
    rho = np.abs(phi) ** 2
    rows = []
    for g, a in zip(grads, np.atleast_2d(a_kappa_real)):
        rows.append(2.0 * (np.imag(np.conj(phi) * g) - rho * np.real(a)))
    return np.stack(rows)


def mean_field_potential(lattice: LatticeSpec, v_table, rho: np.ndarray) -> np.ndarray:
    """(v * rho)(x) = dx^d sum_y v(x - y) rho(y) via the FFT circular
    convolution; the same displacement table feeds the many-body side."""
    if v_table is None:
        return np.zeros(lattice.n_sites)
    shape = _grid_shape(lattice)
    conv = np.fft.ifftn(np.fft.fftn(np.asarray(v_table, dtype=float).reshape(shape))
                        * np.fft.fftn(rho.reshape(shape)))
    return lattice.dx**lattice.dimension * conv.real.ravel()


@dataclass
class MSEnergy:
    kinetic: float
    potential: float
    field: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential + self.field


def ms_energy(state: EffectiveState, params: MSParams) -> MSEnergy:
    """E_M = ||(-i grad - A_kappa) phi||^2 + (1/2) <phi, (v*|phi|^2) phi>
    + ||u||^2, the three terms reported separately.

    The kinetic square is expanded through the same spectral operators as
    the many-body Hamiltonian (full-grid Laplacian, Nyquist-free first
    derivative), so quantum/classical energies agree identically on the
    shared lattice.
    """
    lat = state.lattice
    dv = lat.dx**lat.dimension
    phi = state.phi
    lap_term = float(np.real(np.vdot(phi, laplace_apply(lat, phi))) * dv)
    a_real = _kappa_limited_real(state, params)
    p_phi = momentum_apply(lat, phi)[: coupled_components(lat)]
    cross = sum(np.real(np.vdot(p, a * phi)) for p, a in zip(p_phi, a_real))
    dia = np.sum((a_real**2) @ (np.abs(phi) ** 2))
    kinetic = lap_term - 2.0 * dv * float(cross) + dv * float(dia)
    rho = np.abs(phi) ** 2
    pot = 0.5 * dv * float(rho @ mean_field_potential(lat, params.v_table, rho))
    field = field_energy_quadrature(lat, state.a_four, state.e_four)
    return MSEnergy(kinetic, pot, field)


def sobolev_norms(state: EffectiveState) -> dict:
    """Discrete H^m diagnostics; the regularity the convergence constants
    depend on is monitored, not certified."""
    lat = state.lattice
    dv = lat.dx**lat.dimension
    w = lat.weight
    ksq = laplacian_grid(lat)
    phi_ft = np.fft.fftn(state.phi.reshape(_grid_shape(lat)))
    phi_density = dv**2 / (2.0 * np.pi) ** lat.dimension * np.abs(phi_ft) ** 2
    out = {
        "phi_H1": float(np.sqrt(np.sum(w * (1 + ksq) * phi_density))),
        "phi_H2": float(np.sqrt(np.sum(w * (1 + ksq) ** 2 * phi_density))),
    }
    a_sq = sum(np.abs(c) ** 2 for c in state.a_four)
    e_sq = sum(np.abs(c) ** 2 for c in state.e_four)
    out["A_H2"] = float(np.sqrt(np.sum(w * (1 + ksq) ** 2 * a_sq)))
    out["E_H1"] = float(np.sqrt(np.sum(w * (1 + ksq) * e_sq)))
    return out


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _kappa_limited_real(state: EffectiveState, params: MSParams) -> np.ndarray:
    """(kappa * A)(x): multiplication by the cutoff indicator in k."""
    mask = cutoff_mask(state.lattice, params.cutoff)
    limited = state.a_four * mask[None, ...]
    return state.field_real(limited).real[: coupled_components(state.lattice)]


def _phi_half_step(phi, a_real, tau, lattice, v_table, tol):
    """Strang sandwich for i dphi/dt = ((-i grad - A)^2 + v*|phi|^2) phi
    with frozen A: exact mean-field phase, Lanczos kinetic flow, phase."""
    if v_table is not None:
        phi = phi * np.exp(-0.5j * tau * mean_field_potential(lattice, v_table, np.abs(phi) ** 2))
    if np.max(np.abs(a_real)) == 0.0:
        ft = np.fft.fftn(phi.reshape(_grid_shape(lattice)))
        ft *= np.exp(-1j * tau * laplacian_grid(lattice))
        phi = np.fft.ifftn(ft).ravel()
    else:
        ncoup = coupled_components(lattice)

        def matvec(f):
            out = laplace_apply(lattice, f)
            p_f = momentum_apply(lattice, f)[:ncoup]
            af = [a * f for a in a_real]
            p_af = [momentum_apply(lattice, g)[i] for i, g in enumerate(af)]
            for i in range(ncoup):
                out -= p_af[i] + a_real[i] * p_f[i]
                out += a_real[i] ** 2 * f
            return out

        phi = expm_apply(matvec, phi, tau, tol * np.linalg.norm(phi), m_max=30)
    if v_table is not None:
        phi = phi * np.exp(-0.5j * tau * mean_field_potential(lattice, v_table, np.abs(phi) ** 2))
    return phi


def _transverse_source(lattice, cutoff, phi, a_kappa_real):
    """P(k) 1_{0<|k|<=Lambda} FT[j](k), one grid per component."""
    d = lattice.dimension
    j = current_density(lattice, phi, a_kappa_real)
    shape = _grid_shape(lattice)
    scale = (2.0 * np.pi) ** (-d / 2.0) * lattice.dx**d
    j_four = np.stack([scale * np.fft.fftn(row.reshape(shape)) for row in j])
    mask = cutoff_mask(lattice, cutoff)
    j_four *= mask[None, ...]
    if lattice.n_components == 3:
        ks = wavenumber_grids(lattice)
        ksq = laplacian_grid(lattice)
        ksq_safe = np.where(ksq == 0, 1.0, ksq)
        dot = sum(k * c for k, c in zip(ks, j_four))
        for i, k in enumerate(ks):
            j_four[i] -= k * dot / ksq_safe
    return j_four


def _rotate_fields(lattice, a_four, e_four, dt, source):
    """Exact flow of dA/dt = -E, dE/dt = -Lap A - S per mode, frozen S."""
    ksq = laplacian_grid(lattice)
    active = ksq > 0
    omega = np.sqrt(np.where(active, ksq, 1.0))
    a_new = a_four.copy()
    e_new = e_four.copy()
    for c in range(a_four.shape[0]):
        a_eq = np.where(active, source[c] / np.where(active, ksq, 1.0), 0.0)
        delta = np.where(active, a_four[c] - a_eq, 0.0)
        cos, sin = np.cos(omega * dt), np.sin(omega * dt)
        a_new[c] = np.where(active, a_eq + delta * cos - e_four[c] * sin / omega, a_four[c])
        e_new[c] = np.where(active, e_four[c] * cos + omega * delta * sin, e_four[c])
    return a_new, e_new


def ms_step(state: EffectiveState, params: MSParams) -> EffectiveState:
    """One Strang step of size params.dt.

    The field rotation freezes the transverse source at its midpoint
    value (half-rotate, re-evaluate the current, rotate from the start),
    which keeps the scheme second order when the |phi|^2 (kappa*A) part
    of the current moves within the step.
    """
    lat, modes = state.lattice, state.modes
    dt = params.dt
    tau = dt / 2.0

    a_k0 = _kappa_limited_real(state, params)
    phi_mid = _phi_half_step(state.phi, a_k0, tau, lat, params.v_table, params.tolerance)

    if modes.n_modes:
        src0 = _transverse_source(lat, params.cutoff, phi_mid, a_k0)
        a_half, _ = _rotate_fields(lat, state.a_four, state.e_four, tau, src0)
        half_state = EffectiveState(lat, modes, phi_mid, a_half, state.e_four, state.t)
        a_k_half = _kappa_limited_real(half_state, params)
        src_mid = _transverse_source(lat, params.cutoff, phi_mid, a_k_half)
        a_new, e_new = _rotate_fields(lat, state.a_four, state.e_four, dt, src_mid)
    else:
        a_new, e_new = state.a_four.copy(), state.e_four.copy()

    end_state = EffectiveState(lat, modes, phi_mid, a_new, e_new, state.t)
    a_k1 = _kappa_limited_real(end_state, params)
    phi_new = _phi_half_step(phi_mid, a_k1, tau, lat, params.v_table, params.tolerance)

    if not np.all(np.isfinite(phi_new)):
        raise NumericalError(f"mean-field step produced non-finite phi at t={state.t:.4g}")
    return EffectiveState(lat, modes, phi_new, a_new, e_new, state.t + dt)


def ms_evolve(state: EffectiveState, params: MSParams, n_steps: int,
              energy_guard: float = 0.5) -> EffectiveState:
    """Advance n_steps, aborting on an energy excursion beyond the guard
    fraction (instability detector)."""
    e0 = ms_energy(state, params).total
    scale = max(abs(e0), 1.0)
    current = state
    for step in range(n_steps):
        current = ms_step(current, params)
        if (step + 1) % 64 == 0:
            drift = abs(ms_energy(current, params).total - e0)
            if drift > energy_guard * scale:
                raise NumericalError(
                    f"energy drifted by {drift:.3g} after {step + 1} steps; "
                    "reduce dt (instability)"
                )
    return current
