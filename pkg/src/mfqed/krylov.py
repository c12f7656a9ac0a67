"""Lanczos approximation of exp(-i dt H) v for hermitian operators given
only through their matrix-vector product."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NumericalError


class LanczosNoConvergence(Exception):
    def __init__(self, residual):
        self.residual = residual


def lanczos_expm_step(matvec, v0: np.ndarray, dt: float, tol: float, m_max: int = 40):
    """Single Krylov application of exp(-i dt H) to v0.

    Full reorthogonalization; the a-posteriori residual estimate is
    |beta_m * u_m| with u = exp(-i dt T) e_1.  Raises LanczosNoConvergence
    when m_max vectors do not reach `tol`.
    """
    nrm = np.linalg.norm(v0)
    if nrm == 0.0:
        return v0.copy(), 0.0
    basis = [v0 / nrm]
    alphas: list[float] = []
    betas: list[float] = []
    err = np.inf
    for j in range(m_max):
        cand = matvec(basis[-1])
        alphas.append(float(np.real(np.vdot(basis[-1], cand))))
        cand = cand - alphas[-1] * basis[-1]
        if j > 0:
            cand = cand - betas[-1] * basis[-2]
        for b in basis:
            cand -= np.vdot(b, cand) * b
        beta = float(np.linalg.norm(cand))
        m = j + 1
        if beta < 1e-14 or m == m_max or m % 4 == 0:
            t = np.diag(alphas).astype(complex)
            for i, bv in enumerate(betas):
                t[i, i + 1] = bv
                t[i + 1, i] = bv
            u = scipy.linalg.expm(-1j * dt * t)[:, 0]
            err = abs(beta * u[-1]) * nrm
            if beta < 1e-14 or err <= tol:
                w = np.zeros_like(v0)
                for coef, b in zip(u, basis):
                    w += coef * b
                return nrm * w, err
        betas.append(beta)
        basis.append(cand / beta)
    raise LanczosNoConvergence(err)


def expm_apply(matvec, v: np.ndarray, dt: float, tol: float, m_max: int = 40,
               max_splits: int = 12) -> np.ndarray:
    """exp(-i dt H) v with adaptive interval splitting.

    The interval is halved until every sub-step meets its share of the
    error budget; raises NumericalError after `max_splits` halvings.
    """
    if dt == 0.0:
        return v.copy()
    substeps = 1
    residual = np.inf
    for _ in range(max_splits + 1):
        step = dt / substeps
        tol_step = tol / substeps
        out = v
        try:
            for _k in range(substeps):
                out, _err = lanczos_expm_step(matvec, out, step, tol_step, m_max)
            return out
        except LanczosNoConvergence as exc:
            residual = exc.residual
            substeps *= 2
    raise NumericalError(
        f"Krylov exponential did not converge at m_max={m_max} after "
        f"{max_splits} interval halvings; last residual estimate {residual:.3g}"
    )
