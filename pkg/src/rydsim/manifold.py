"""Single-atom Hamiltonians and state transfer inside one n-manifold.

Static parallel electric/magnetic fields give the linear Stark-Zeeman
ladder -w_a J_az + w_b J_bz; microwave drives add the most general terms
linear in the two angular momenta; quantum defects displace the low-l
states, expressed in the (m_a, m_b) basis through the coupled-basis
transform; and a swept b-drive adiabatically maps the anti-diagonal
(vertical) manifold onto the edge manifold.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import constants as const
from .errors import BasisNotFull, InglisTellerExceeded
from .krylov import propagate
from .spinops import (CGTable, ManifoldBasis, SparseOperator,
                      build_jpm, build_jz, cg_transform)

_CG_CACHE: dict = {}


@dataclass(frozen=True)
class FieldConfig:
    """Static fields and the derived manifold splittings (all rad/s).

    f_vcm is the electric field in V/cm, b_gauss the magnetic field in gauss;
    both point along z.  omega_a = omega_s - omega_z and
    omega_b = omega_s + omega_z by construction.
    """

    n: int
    f_vcm: float
    b_gauss: float

    @property
    def omega_s(self) -> float:
        return 1.5 * self.n * const.E_CHARGE * const.A_BOHR \
            * (self.f_vcm * const.VCM_TO_VM) / const.HBAR

    @property
    def omega_z(self) -> float:
        return const.MU_B * (self.b_gauss * const.GAUSS_TO_T) / const.HBAR

    @property
    def omega_a(self) -> float:
        return self.omega_s - self.omega_z

    @property
    def omega_b(self) -> float:
        return self.omega_s + self.omega_z

    @property
    def f_it_vcm(self) -> float:
        """Inglis-Teller field: adjacent manifolds start to mix above it."""
        f_it = 2.0 * const.RYDBERG_J / (3.0 * const.E_CHARGE * const.A_BOHR * self.n**5)
        return f_it / const.VCM_TO_VM

    @property
    def valid(self) -> bool:
        return 0.0 <= self.f_vcm < self.f_it_vcm

    @classmethod
    def from_it_fraction(cls, n: int, f_fraction: float,
                         zeeman_to_stark: float) -> "FieldConfig":
        """Fields from F as a fraction of F_IT and the ratio omega_z/omega_s."""
        probe = cls(n, 1.0, 0.0)
        f_vcm = f_fraction * probe.f_it_vcm
        omega_s = cls(n, f_vcm, 0.0).omega_s
        b_gauss = zeeman_to_stark * omega_s * const.HBAR / const.MU_B / const.GAUSS_TO_T
        return cls(n, f_vcm, b_gauss)


@dataclass(frozen=True)
class MWDrive:
    """Rotating-frame microwave parameters of the two circular components."""

    delta_a: float = 0.0
    delta_b: float = 0.0
    omega_a: complex = 0.0
    omega_b: complex = 0.0


@dataclass(frozen=True)
class DefectModel:
    """Quantum defects delta_l for l < lstar and the induced energy shifts."""

    lstar: int
    deltas: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lstar < 0:
            raise ValueError("lstar must be >= 0")
        missing = [l for l in range(self.lstar) if l not in self.deltas]
        if missing:
            raise ValueError(f"missing quantum defects for l = {missing}")

    @classmethod
    def rubidium_like(cls) -> "DefectModel":
        # representative alkali defaults (s/p/d); convenience only, not a
        # source of atomic data -- supply measured values for real work
        return cls(lstar=3, deltas={0: 3.131, 1: 2.654, 2: 1.348})

    @classmethod
    def none(cls) -> "DefectModel":
        return cls(lstar=0, deltas={})

    def shift(self, n: int, l: int) -> float:
        """E_{n,l} - E_n in rad/s (negative for positive defects)."""
        if l >= self.lstar:
            return 0.0
        delta = self.deltas[l]
        return const.RYDBERG_W * (1.0 / n**2 - 1.0 / (n - delta) ** 2)


def build_static(basis: ManifoldBasis, fields: FieldConfig) -> SparseOperator:
    """-w_a J_az + w_b J_bz (diagonal)."""
    if not fields.valid:
        raise InglisTellerExceeded(
            f"F = {fields.f_vcm:.4g} V/cm >= F_IT = {fields.f_it_vcm:.4g} V/cm")
    ma, mb = basis.m_arrays()
    diag = -fields.omega_a * ma + fields.omega_b * mb
    return SparseOperator(sp.diags(diag.astype(complex), format="csr"), hermitian=True)


def build_mw(basis: ManifoldBasis, drive: MWDrive) -> SparseOperator:
    """Sum over species of -Delta J_z + (Omega J_+ + Omega* J_-)."""
    mat = sp.csr_matrix((len(basis), len(basis)), dtype=complex)
    for which, delta, omega in (("a", drive.delta_a, drive.omega_a),
                                ("b", drive.delta_b, drive.omega_b)):
        if delta != 0.0:
            mat = mat - delta * build_jz(basis, which).matrix
        if omega != 0.0:
            jp = build_jpm(basis, which, +1).matrix
            mat = mat + omega * jp + np.conj(omega) * jp.conjugate().transpose()
    return SparseOperator(mat, hermitian=True)


def defect_operator(basis: ManifoldBasis, spin_n: int, defects: DefectModel,
                    cg: CGTable) -> SparseOperator:
    """Sum over l < lstar, |m_l| <= l of the projector times its shift.

    Requires the full basis: the coupled-basis projectors involve all
    (m_a, m_b) combinations of each m_l block.
    """
    if basis.kind != "full":
        raise BasisNotFull("defect shifts require the full n-manifold basis")
    dim = len(basis)
    mat = sp.csr_matrix((dim, dim), dtype=complex)
    for l in range(defects.lstar):
        shift = defects.shift(spin_n, l)
        if shift == 0.0:
            continue
        for m_l in range(-l, l + 1):
            vec = cg.coupled_vector(l, m_l, basis)
            nz = np.nonzero(vec)[0]
            proj = sp.csr_matrix((np.outer(vec[nz], vec[nz]).ravel(),
                                  (np.repeat(nz, len(nz)), np.tile(nz, len(nz)))),
                                 shape=(dim, dim))
            mat = mat + shift * proj
    return SparseOperator(mat, hermitian=True)


def build_qd(basis: ManifoldBasis, fields: FieldConfig, defects: DefectModel,
             cg: CGTable) -> SparseOperator:
    """Static ladder plus quantum-defect displacements of the low-l states."""
    static = build_static(basis, fields)
    qd = defect_operator(basis, fields.n, defects, cg)
    return SparseOperator(static.matrix + qd.matrix, hermitian=True)


def build_vg(basis: ManifoldBasis, rabi: dict) -> SparseOperator:
    """Laser coupling of vertical-manifold states to an appended ground state.

    `rabi` maps m_a -> complex Omega_{m_a,gs}; the operator acts on dimension
    len(basis) + 1 with the ground state as the last index.
    """
    if basis.kind != "vertical":
        raise ValueError("ground-state coupling is defined on a vertical basis")
    dim = len(basis) + 1
    gs = dim - 1
    rows, cols, vals = [], [], []
    for m_a, omega in rabi.items():
        idx = basis.index_of(m_a, basis.lstar - m_a)
        if idx is None or omega == 0.0:
            continue
        rows += [idx, gs]
        cols += [gs, idx]
        vals += [0.5 * omega, 0.5 * np.conj(omega)]
    return SparseOperator.from_coo(dim, rows, cols, vals, hermitian=True)


# ----------------------------------------------------------------------
# Adiabatic rapid passage
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepProtocol:
    """Detuning/Rabi schedules of the swept b-drive.

    Defaults follow delta_b(t) = delta0 cos(pi t / T) and
    omega_b(t) = omega0 sin(pi t / T), which start and end with the drive off
    and sweep the detuning through zero once.  delta_b counts the drive
    starting below the ladder resonance for delta0 > 0 (the sweep frame uses
    delta_b = w_b - w_b^drive, mirroring the a-species convention), which is
    the branch that keeps the swept chain clear of the displaced defect
    states; delta0 = -|delta0| selects the other dressed branch.
    """

    duration: float
    delta0: float
    omega0: complex

    def delta_b(self, t: float) -> float:
        return self.delta0 * math.cos(math.pi * t / self.duration)

    def omega_b(self, t: float) -> complex:
        return self.omega0 * math.sin(math.pi * t / self.duration)

    def delta_b_integral(self, t0: float, t1: float) -> float:
        """Exact integral of delta_b over [t0, t1] for the cosine schedule."""
        w = math.pi / self.duration
        return self.delta0 / w * (math.sin(w * t1) - math.sin(w * t0))


@dataclass
class SweepResult:
    fidelities: dict
    final_states: dict
    eigenvalue_traces: np.ndarray | None
    trace_times: np.ndarray | None


def _chain_window_indices(basis: ManifoldBasis, lstar: int, m_a: float) -> np.ndarray:
    """Indices of the fixed-m_a b-chain plus the whole defect window.

    The swept dynamics lives on the m_a chain; the |m_l| < lstar window is
    reached only virtually but mediates the level repulsion that blocks the
    downward path, so it is kept in full (every m_a).  Chains at other m_a
    connect only through two drive legs across the far-detuned window and
    carry ~(Omega/shift)^2 amplitude; dropping them is the one truncation.
    """
    ma, mb = basis.m_arrays()
    keep = (np.abs(ma - m_a) < 1e-9) | (np.abs(ma + mb) < lstar - 1e-9)
    return np.nonzero(keep)[0]


def arp_sweep(basis: ManifoldBasis, fields: FieldConfig, defects: DefectModel,
              protocol: SweepProtocol, m_a_values=(0,), cg: CGTable | None = None,
              initial_state: np.ndarray | None = None, n_steps: int = 4000,
              krylov_tol: float = 1e-9, engine: str = "reduced",
              trace_points: int = 0) -> SweepResult:
    """Propagate vertical-manifold states through the swept multi-photon drive.

    The frame rotates with the instantaneous drive frequency via the total
    L_z = J_az + J_bz, under which the defect operator is static:

        H(t) = H_qd - (w_b - delta_b(t)) L_z + omega_b(t) J_b+ + h.c.

    engine='reduced' restricts each sweep to the chain-plus-defect-window
    subspace (see `_chain_window_indices`) and steps with exact per-step
    diagonalisation; engine='krylov' propagates the full basis and serves
    as the reference for validating the reduction.

    Returns the overlap with the edge-manifold target |m_a, J> for every
    requested m_a, and optionally the instantaneous spectrum on a coarse
    grid for level-crossing diagnostics.
    """
    if not np.all(np.abs([protocol.omega_b(t) for t in
                          np.linspace(0, protocol.duration, 16)])
                  < 0.2 * min(abs(fields.omega_a), abs(fields.omega_b))):
        warnings.warn("drive strength is not small against the static splittings; "
                      "the rotating-wave treatment may be inaccurate")
    if cg is None and defects.lstar > 0:
        if basis.spin.j not in _CG_CACHE:
            _CG_CACHE[basis.spin.j] = cg_transform(basis.spin)
        cg = _CG_CACHE[basis.spin.j]
    if defects.lstar == 0:
        h_atom = build_static(basis, fields).matrix
    else:
        h_atom = build_qd(basis, fields, defects, cg).matrix

    ma, mb = basis.m_arrays()
    lz_diag = ma + mb
    lz = sp.diags(lz_diag.astype(complex), format="csr")
    jbp = build_jpm(basis, "b", +1).matrix
    jbm = jbp.conjugate().transpose().tocsr()
    h_static = h_atom - fields.omega_b * lz
    j = basis.spin.j
    duration = protocol.duration
    grid = np.linspace(0.0, duration, n_steps + 1)
    mids = 0.5 * (grid[:-1] + grid[1:])
    dts = np.diff(grid)

    if initial_state is not None and len(m_a_values) != 1:
        raise ValueError("an explicit initial state needs a single m_a label")

    def starts_targets(m_a):
        start = basis.index_of(m_a, defects.lstar - m_a)
        target = basis.index_of(m_a, j)
        if start is None or target is None:
            raise ValueError(f"m_a = {m_a} has no vertical or edge state")
        return start, target

    fidelities, finals = {}, {}
    if engine == "reduced":
        for m_a in m_a_values:
            start, target = starts_targets(m_a)
            sel = _chain_window_indices(basis, defects.lstar, m_a)
            sub = np.ix_(sel, sel)
            h_sub = h_static[sub].toarray()
            lz_sub = np.real(lz_diag[sel])
            jbp_sub = jbp[sub].toarray()
            if initial_state is None:
                psi = np.zeros(len(sel), dtype=complex)
                psi[np.nonzero(sel == start)[0][0]] = 1.0
            else:
                psi = np.asarray(initial_state, dtype=complex)[sel]
                if abs(np.linalg.norm(psi) - 1.0) > 1e-6:
                    raise ValueError("initial state has weight outside the "
                                     "chain-plus-window subspace")
            tpos = np.nonzero(sel == target)[0][0]
            for k in range(n_steps):
                om = protocol.omega_b(mids[k])
                hk = h_sub + om * jbp_sub + np.conj(om) * jbp_sub.conj().T
                hk[np.diag_indices_from(hk)] += protocol.delta_b(mids[k]) * lz_sub
                evals, evecs = np.linalg.eigh(hk)
                psi = evecs @ (np.exp(-1j * dts[k] * evals) * (evecs.conj().T @ psi))
            fidelities[m_a] = float(abs(psi[tpos]) ** 2)
            full = np.zeros(len(basis), dtype=complex)
            full[sel] = psi
            finals[m_a] = full
    elif engine == "krylov":
        def h_of_t(t):
            om = protocol.omega_b(t)
            return (h_static + protocol.delta_b(t) * lz
                    + om * jbp + np.conj(om) * jbm)
        times = np.array([0.0, duration])
        for m_a in m_a_values:
            start, target = starts_targets(m_a)
            psi0 = _unit(len(basis), start) if initial_state is None \
                else np.asarray(initial_state, dtype=complex)
            res = propagate(h_of_t, psi0, times, substeps=n_steps, tol=krylov_tol)
            fidelities[m_a] = float(abs(res.final_state[target]) ** 2)
            finals[m_a] = res.final_state
    else:
        raise ValueError(f"unknown engine {engine!r}")

    traces = trace_times = None
    if trace_points > 0:
        def h_of_t_full(t):
            om = protocol.omega_b(t)
            return (h_static + protocol.delta_b(t) * lz
                    + om * jbp + np.conj(om) * jbm)
        trace_times = np.linspace(0.0, duration, trace_points)
        traces = np.empty((trace_points, len(basis)))
        for k, t in enumerate(trace_times):
            traces[k] = np.linalg.eigvalsh(h_of_t_full(t).toarray())
    return SweepResult(fidelities=fidelities, final_states=finals,
                       eigenvalue_traces=traces, trace_times=trace_times)


def _unit(dim: int, index: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return vec


# ----------------------------------------------------------------------
# Motional-excitation estimates
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MotionalEstimate:
    """Vibrational heating of a trapped atom under a dipolar force gradient."""

    trap_length: float    # l_t (m)
    coupling: float       # U(l_t) (rad/s)
    interaction: float    # V_eff (rad/s)

    def excitations(self, t: float) -> float:
        """n(t) = U(l_t)^2 t^2 / 8 (short-time, ground-state-cooled start)."""
        return (self.coupling * t) ** 2 / 8.0


def motional_estimates(v_eff: float, r_ij: float, omega_t: float,
                       mass_amu: float) -> MotionalEstimate:
    """Trap length, force coupling and excitation number for a tweezer atom.

    v_eff is the effective pair interaction (rad/s), r_ij the separation (m),
    omega_t the trap frequency (rad/s) and mass_amu the atomic mass.
    """
    mass = mass_amu * const.AMU
    l_t = math.sqrt(const.HBAR / (mass * omega_t))
    coupling = 3.0 * l_t * v_eff / r_ij
    if coupling > 0.1 * omega_t:
        warnings.warn("U(l_t) is not small against the trap frequency; "
                      "the perturbative excitation estimate degrades")
    return MotionalEstimate(trap_length=l_t, coupling=coupling, interaction=v_eff)
