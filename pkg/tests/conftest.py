import itertools

import numpy as np
import pytest

from mfqed.field_modes import LatticeSpec, build_mode_set
from mfqed.fock import CoherentAmplitude, FockBasis


def gaussian_table(lattice, strength, width, images=4):
    pos = lattice.site_positions()
    out = np.zeros(lattice.n_sites)
    for img in itertools.product(range(-images, images + 1), repeat=lattice.dimension):
        shift = np.asarray(img, dtype=float) * lattice.length
        out += strength * np.exp(-np.sum((pos + shift) ** 2, axis=1) / (2.0 * width**2))
    return out


def normalized_phi(lattice, values):
    phi = np.asarray(values, dtype=complex)
    return phi / np.sqrt(lattice.dx**lattice.dimension * np.sum(np.abs(phi) ** 2))


@pytest.fixture(scope="session")
def lat8():
    return LatticeSpec(1, 8, 2.0 * np.pi)


@pytest.fixture(scope="session")
def modes8(lat8):
    return build_mode_set(lat8, 2.5)


@pytest.fixture(scope="session")
def small_system():
    """Tiny composite system for randomized property tests."""
    lat = LatticeSpec(1, 4, 2.0 * np.pi)
    modes = build_mode_set(lat, 1.2)
    fb = FockBasis.build(modes, 2)
    return lat, modes, fb


def random_composite(pb, fb, rng):
    from mfqed.manybody import CompositeState

    vec = rng.normal(size=pb.dim * fb.dim) + 1j * rng.normal(size=pb.dim * fb.dim)
    vec /= np.linalg.norm(vec)
    return CompositeState(pb, fb, vec)


def random_amplitude(modes, rng, scale=0.3):
    vals = scale * (rng.normal(size=modes.n_modes) + 1j * rng.normal(size=modes.n_modes))
    return CoherentAmplitude(modes, vals)
