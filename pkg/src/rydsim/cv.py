"""Spin <-> continuous-variable bridge for a single site.

A large spin truncates a particle on a ring: J_z plays the momentum and
J_+- / sqrt(J(J+1)) the phase operators e^{+-i phi}.  `continuum_spectrum`
solves the ring problem exactly in momentum space; `spin_spectrum` is the
(2J+1)-dimensional truncation whose low-lying levels converge to it as J
grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CutoffTooSmall
from .spinops import ManifoldBasis, SpinLength, build_jz, ladder_power


@dataclass(frozen=True)
class RingParticleParams:
    """Kinetic coefficient and cosine depths of the ring particle.

    H = chi pi^2 - omega_p cos(phi) - lam cos(kappa phi + theta); kappa >= 1.
    """

    chi: float
    omega_p: float = 0.0
    lam: float = 0.0
    kappa: int = 1
    theta: float = 0.0

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("harmonic index kappa must be >= 1")


def default_m_cut(params: RingParticleParams) -> int:
    depth = max(abs(params.omega_p), abs(params.lam)) / params.chi \
        if params.chi else 0.0
    return int(4 * max(np.sqrt(depth), params.kappa) + 20)


def _ring_matrix(params: RingParticleParams, m_cut: int) -> np.ndarray:
    ms = np.arange(-m_cut, m_cut + 1)
    dim = len(ms)
    h = np.zeros((dim, dim), dtype=complex)
    h[np.diag_indices(dim)] = params.chi * ms.astype(float) ** 2
    idx = np.arange(dim - 1)
    h[idx + 1, idx] += -0.5 * params.omega_p   # e^{+i phi}: m -> m + 1
    h[idx, idx + 1] += -0.5 * params.omega_p
    if params.lam != 0.0 and dim > params.kappa:
        idx = np.arange(dim - params.kappa)
        h[idx + params.kappa, idx] += -0.5 * params.lam * np.exp(1j * params.theta)
        h[idx, idx + params.kappa] += -0.5 * params.lam * np.exp(-1j * params.theta)
    return h


def continuum_spectrum(params: RingParticleParams, n_levels: int | None = None,
                       m_cut: int | None = None, tail_tol: float = 1e-12,
                       max_cut: int = 4096, extra_unbound: int = 3):
    """Sorted eigenvalues of the ring particle on momenta |m| <= m_cut.

    The cutoff doubles until the requested eigenvectors carry less than
    tail_tol weight on the boundary momenta.  Without an explicit n_levels
    the returned window is every level below the potential maximum plus
    `extra_unbound` (deep truncation never converges for high plane waves).
    """
    cut = m_cut if m_cut is not None else default_m_cut(params)
    vmax = abs(params.omega_p) + abs(params.lam)
    while True:
        h = _ring_matrix(params, cut)
        evals, evecs = np.linalg.eigh(h)
        if n_levels is not None:
            k = n_levels
        else:
            k = int(np.sum(evals < vmax)) + extra_unbound
        k = min(k, len(evals))
        tail = np.abs(evecs[[0, -1], :k]).max()
        if tail < tail_tol:
            return evals[:k]
        if m_cut is not None or 2 * cut > max_cut:
            raise CutoffTooSmall(
                f"boundary weight {tail:.2e} at m_cut = {cut} exceeds {tail_tol:.1e}")
        cut *= 2


def spin_hamiltonian(params: RingParticleParams, spin: SpinLength) -> np.ndarray:
    """Finite-spin truncation: chi J_z^2 with normalized ladder cosines."""
    basis = ManifoldBasis.edge_a(spin)
    jz = build_jz(basis, "a").to_dense()
    h = params.chi * (jz @ jz)
    norm = np.sqrt(spin.j * (spin.j + 1.0))
    jp = ladder_power(basis, 1, 0).to_dense()
    h = h - 0.5 * (params.omega_p / norm) * (jp + jp.conj().T)
    if params.lam != 0.0:
        jk = ladder_power(basis, params.kappa, 0).to_dense()
        coeff = 0.5 * params.lam / norm**params.kappa
        h = h - coeff * (np.exp(1j * params.theta) * jk
                         + np.exp(-1j * params.theta) * jk.conj().T)
    return h


def spin_spectrum(params: RingParticleParams, spin: SpinLength) -> np.ndarray:
    """Sorted eigenvalues of the (2J+1)-dimensional truncation."""
    return np.linalg.eigvalsh(spin_hamiltonian(params, spin))


def bound_level_count(params: RingParticleParams) -> int:
    """Number of continuum levels below the potential maximum."""
    vmax = abs(params.omega_p) + abs(params.lam)
    spec = continuum_spectrum(params, extra_unbound=3)
    return int(np.sum(spec < vmax))


@dataclass
class ConvergenceReport:
    j_values: list
    deviations: np.ndarray      # (n_j, n_levels) absolute deviations
    continuum: np.ndarray
    compared_levels: int


def convergence_scan(params: RingParticleParams, j_values,
                     extra_unbound: int = 3) -> ConvergenceReport:
    """Deviation of the finite-spin levels from the ring spectrum vs J.

    Compares every level below the potential maximum plus a few unbound
    ones, the default comparison window for convergence studies.
    """
    n_bound = bound_level_count(params)
    k = n_bound + extra_unbound
    cont = continuum_spectrum(params, n_levels=k)
    devs = np.empty((len(j_values), k))
    for row, j in enumerate(j_values):
        spec = spin_spectrum(params, SpinLength(float(j)))[:k]
        devs[row] = np.abs(spec - cont)
    return ConvergenceReport(j_values=list(j_values), deviations=devs,
                             continuum=cont, compared_levels=k)
