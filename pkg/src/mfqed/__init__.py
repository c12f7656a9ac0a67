"""Numerical laboratory for the mean-field limit of charged bosons
coupled to a quantized radiation field: exact lattice dynamics under the
Pauli-Fierz Hamiltonian versus the effective Maxwell-Schrodinger system,
compared through counting functionals and reduced-matrix trace norms."""

__version__ = "0.1.0"
