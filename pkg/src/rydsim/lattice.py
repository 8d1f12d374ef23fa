"""Many-body Hamiltonians on tweezer geometries and the sparse solver engine.

Pair interactions follow the full angular dipole-dipole form; for planar
arrays (both static fields perpendicular to the plane) the rotating-wave
surviving part reduces to an Ising block in J_az - J_bz, intra-species
flip-flops with a -1/4 weight, and a cross-species pair term carrying twice
the bond azimuth as a phase.  Model builders assemble N-site operators by
Kronecker embedding; `ground_state` and `evolve` provide the Lanczos and
Krylov machinery used by every experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constants as const
from .errors import (CoincidentAtoms, EDBudgetExceeded, NoConvergence,
                     NonPlanarGeometry, ToleranceFailure)
from .krylov import PropagationResult, propagate
from .spinops import ManifoldBasis, SparseOperator, build_cartesian, build_jpm, build_jz

DEFAULT_ED_BUDGET = int(2e7)


# ----------------------------------------------------------------------
# Geometry
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeGeometry:
    """Atom positions (m) with open or ring boundary.

    Ring boundaries are supported for chains along x with period
    n_sites * spacing; distances then use the minimum image.
    """

    positions: np.ndarray
    boundary: str = "open"
    period: float | None = None

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[1] != 3:
            raise ValueError("positions must be (N, 3)")
        object.__setattr__(self, "positions", pos)
        if self.boundary not in ("open", "ring"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "ring" and self.period is None:
            raise ValueError("ring boundary requires a period")

    @classmethod
    def chain(cls, n_sites: int, spacing: float,
              boundary: str = "open") -> "LatticeGeometry":
        pos = np.zeros((n_sites, 3))
        pos[:, 0] = spacing * np.arange(n_sites)
        period = spacing * n_sites if boundary == "ring" else None
        return cls(pos, boundary, period)

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    def separation(self, i: int, j: int) -> np.ndarray:
        """Displacement vector from i to j (minimum image on a ring)."""
        d = self.positions[j] - self.positions[i]
        if self.boundary == "ring":
            d = d.copy()
            d[0] -= self.period * np.round(d[0] / self.period)
        return d

    def pair_angles(self, i: int, j: int) -> tuple[float, float, float]:
        """(R_ij, theta_ij, phi_ij) of the bond."""
        d = self.separation(i, j)
        r = float(np.linalg.norm(d))
        if r == 0.0:
            raise CoincidentAtoms(f"atoms {i} and {j} coincide")
        theta = math.acos(max(-1.0, min(1.0, d[2] / r)))
        phi = math.atan2(d[1], d[0])
        return r, theta, phi

    def coupling(self, n: int, i: int, j: int) -> float:
        """Dipole-dipole scale V_ij = (3 n e a0)^2 / (16 pi eps0 R^3) in rad/s."""
        r, _, _ = self.pair_angles(i, j)
        mu = 3.0 * n * const.E_CHARGE * const.A_BOHR
        return mu**2 / (16.0 * math.pi * const.EPS0 * r**3) / const.HBAR

    def coupling_matrix(self, n: int) -> np.ndarray:
        nn = self.n_sites
        v = np.zeros((nn, nn))
        for i in range(nn):
            for j in range(i + 1, nn):
                v[i, j] = v[j, i] = self.coupling(n, i, j)
        return v

    def is_planar(self, tol: float = 1e-9) -> bool:
        """True when every bond lies perpendicular to z."""
        return all(abs(self.pair_angles(i, j)[1] - 0.5 * math.pi) < tol
                   for i in range(self.n_sites) for j in range(i + 1, self.n_sites))


def ring_couplings(n_sites: int, v_nn: float, boundary: str = "ring",
                   truncation: str = "nn", r_max: float | None = None) -> np.ndarray:
    """Dimensionless chain couplings: v_nn at distance 1 with a 1/d^3 tail.

    truncation 'nn' keeps nearest neighbors only, 'full' the whole tail,
    'cutoff' everything with (integer) distance <= r_max.  Ring distances
    use the minimum image.
    """
    v = np.zeros((n_sites, n_sites))
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            d = j - i
            if boundary == "ring":
                d = min(d, n_sites - d)
            if truncation == "nn" and d != 1:
                continue
            if truncation == "cutoff" and (r_max is None or d > r_max):
                continue
            v[i, j] = v[j, i] = v_nn / d**3
    return v


def bond_phases(geom: LatticeGeometry) -> np.ndarray:
    """phi_ij for every pair (antisymmetric up to pi, enters only as 2 phi)."""
    nn = geom.n_sites
    phi = np.zeros((nn, nn))
    for i in range(nn):
        for j in range(nn):
            if i != j:
                phi[i, j] = geom.pair_angles(i, j)[2]
    return phi


# ----------------------------------------------------------------------
# Kronecker embedding
# ----------------------------------------------------------------------

def check_budget(dim: int, budget: int = DEFAULT_ED_BUDGET) -> None:
    if dim > budget:
        raise EDBudgetExceeded(
            f"many-body dimension {dim:.3g} exceeds the budget {budget:.3g}; "
            "raise the budget explicitly for long runs")


def site_operator(op, site: int, n_sites: int, site_dim: int) -> sp.csr_matrix:
    mat = op.matrix if isinstance(op, SparseOperator) else sp.csr_matrix(op)
    left = site_dim**site
    right = site_dim**(n_sites - site - 1)
    out = mat
    if left > 1:
        out = sp.kron(sp.identity(left, dtype=mat.dtype, format="csr"), out,
                      format="csr")
    if right > 1:
        out = sp.kron(out, sp.identity(right, dtype=mat.dtype, format="csr"),
                      format="csr")
    return out.tocsr()


def pair_operator(op_i, op_j, i: int, j: int, n_sites: int,
                  site_dim: int) -> sp.csr_matrix:
    if i == j:
        raise ValueError("pair operator needs two distinct sites")
    if i > j:
        i, j = j, i
        op_i, op_j = op_j, op_i
    a = op_i.matrix if isinstance(op_i, SparseOperator) else sp.csr_matrix(op_i)
    b = op_j.matrix if isinstance(op_j, SparseOperator) else sp.csr_matrix(op_j)
    out = a
    mid = site_dim**(j - i - 1)
    if mid > 1:
        out = sp.kron(out, sp.identity(mid, dtype=a.dtype, format="csr"),
                      format="csr")
    out = sp.kron(out, b, format="csr")
    left = site_dim**i
    right = site_dim**(n_sites - j - 1)
    if left > 1:
        out = sp.kron(sp.identity(left, dtype=a.dtype, format="csr"), out,
                      format="csr")
    if right > 1:
        out = sp.kron(out, sp.identity(right, dtype=a.dtype, format="csr"),
                      format="csr")
    return out.tocsr()


def _realify(mat: sp.csr_matrix) -> sp.csr_matrix:
    """Drop an identically-zero imaginary part (halves Lanczos memory)."""
    if np.iscomplexobj(mat.data) and np.all(mat.data.imag == 0.0):
        return sp.csr_matrix((mat.data.real, mat.indices, mat.indptr),
                             shape=mat.shape)
    return mat


@dataclass
class ManyBodyModel:
    """Assembled N-site Hamiltonian with its site bookkeeping."""

    hamiltonian: SparseOperator
    n_sites: int
    site_dim: int
    kind: str
    site_basis: ManifoldBasis | None = None

    def site_observable(self, op, site: int) -> sp.csr_matrix:
        return site_operator(op, site, self.n_sites, self.site_dim)


# ----------------------------------------------------------------------
# Dipole-dipole pair Hamiltonian (full angular form)
# ----------------------------------------------------------------------

def dipole_dipole(geom: LatticeGeometry, basis: ManifoldBasis, i: int, j: int,
                  n: int | None = None) -> SparseOperator:
    """Full two-atom dipolar coupling between sites i and j.

    Acts on basis (x) basis; the four species blocks carry signs
    +aa +bb -ab -ba, each of the form X.Y - 3 (X.e)(Y.e).
    """
    n = n if n is not None else basis.spin.n
    r, theta, phi = geom.pair_angles(i, j)
    v = geom.coupling(n, i, j)
    e = np.array([math.sin(theta) * math.cos(phi),
                  math.sin(theta) * math.sin(phi),
                  math.cos(theta)])
    vecs = {"a": build_cartesian(basis, "a"), "b": build_cartesian(basis, "b")}
    dots = {s: sum(e[u] * vecs[s][u].matrix for u in range(3)) for s in ("a", "b")}
    dim = len(basis) ** 2
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for si, sj, sign in (("a", "a", 1.0), ("b", "b", 1.0),
                         ("a", "b", -1.0), ("b", "a", -1.0)):
        for u in range(3):
            total = total + sign * sp.kron(vecs[si][u].matrix,
                                           vecs[sj][u].matrix, format="csr")
        total = total - 3.0 * sign * sp.kron(dots[si], dots[sj], format="csr")
    return SparseOperator(v * total, hermitian=True)


def surviving_pair_products(basis: ManifoldBasis, phi: float,
                            include_ising: bool = True,
                            include_flipflop: bool = True,
                            include_pair: bool = True):
    """Rotating-wave surviving dipolar products for one planar bond.

    Returns [(op_i, op_j, coeff)] such that the unordered-pair contribution
    at unit V is sum coeff * op_i (x) op_j:

        (J_az - J_bz)(x)(J_az - J_bz)
        - 1/4 sum_s (J_s+ (x) J_s- + h.c.)
        + 3/4 (e^{-2 i phi} [J_a+ (x) J_b+ + J_b+ (x) J_a+] + h.c.)

    The phase conjugation matches the azimuth convention of `pair_angles`.
    """
    ops = {s: {"z": build_jz(basis, s).matrix,
               "+": build_jpm(basis, s, +1).matrix,
               "-": build_jpm(basis, s, -1).matrix} for s in ("a", "b")}
    out = []
    if include_ising:
        zdiff = ops["a"]["z"] - ops["b"]["z"]
        out.append((zdiff, zdiff, 1.0))
    if include_flipflop:
        for s in ("a", "b"):
            out.append((ops[s]["+"], ops[s]["-"], -0.25))
            out.append((ops[s]["-"], ops[s]["+"], -0.25))
    if include_pair:
        ph = np.exp(-2j * phi)
        out.append((ops["a"]["+"], ops["b"]["+"], 0.75 * ph))
        out.append((ops["b"]["+"], ops["a"]["+"], 0.75 * ph))
        out.append((ops["a"]["-"], ops["b"]["-"], 0.75 * np.conj(ph)))
        out.append((ops["b"]["-"], ops["a"]["-"], 0.75 * np.conj(ph)))
    return out


def triangular_hamiltonian(geom: LatticeGeometry, basis: ManifoldBasis,
                           site_terms=None, n: int | None = None,
                           truncation: str = "full", r_max: float | None = None,
                           budget: int = DEFAULT_ED_BUDGET) -> ManyBodyModel:
    """Interacting array on the triangular manifold, planar geometry.

    site_terms is a single-site SparseOperator (drives, nonlinear terms)
    shared by all sites, or a list with one entry per site.
    """
    if not geom.is_planar():
        raise NonPlanarGeometry("triangular-manifold model requires theta = pi/2")
    n = n if n is not None else basis.spin.n
    nn = geom.n_sites
    d = len(basis)
    check_budget(d**nn, budget)
    ham = sp.csr_matrix((d**nn, d**nn), dtype=complex)
    if site_terms is not None:
        terms = site_terms if isinstance(site_terms, (list, tuple)) \
            else [site_terms] * nn
        for i, term in enumerate(terms):
            if term is not None:
                ham = ham + site_operator(term, i, nn, d)
    pairs = [(i, j) + geom.pair_angles(i, j)
             for i in range(nn) for j in range(i + 1, nn)]
    spacing = min(p[2] for p in pairs)
    for i, j, r, _theta, phi in pairs:
        if truncation == "nn" and r > 1.5 * spacing:
            continue
        if truncation == "cutoff" and (r_max is None or r > r_max):
            continue
        v = geom.coupling(n, i, j)
        for op_i, op_j, coeff in surviving_pair_products(basis, phi):
            ham = ham + (v * coeff) * pair_operator(op_i, op_j, i, j, nn, d)
    return ManyBodyModel(SparseOperator(_realify(ham.tocsr()), hermitian=True),
                         nn, d, "triangular", basis)


# ----------------------------------------------------------------------
# Edge-manifold XXZ model
# ----------------------------------------------------------------------

def edge_site_term(basis: ManifoldBasis, delta_a: float = 0.0, chi: float = 0.0,
                   ladder_terms=()) -> SparseOperator:
    """-Delta_a J_z + chi J_z^2 + sum_kappa (lambda_kappa J_+^kappa + h.c.).

    `ladder_terms` is an iterable of (kappa, lambda) with integer kappa >= 1
    and complex strength lambda.
    """
    from .spinops import ladder_power

    jz = build_jz(basis, "a").matrix
    mat = -delta_a * jz + chi * (jz @ jz)
    for kappa, lam in ladder_terms:
        jk = ladder_power(basis, int(kappa), 0).matrix
        mat = mat + lam * jk + np.conj(lam) * jk.conjugate().transpose()
    return SparseOperator(mat.tocsr(), hermitian=True)


def edge_xxz_hamiltonian(couplings: np.ndarray, basis: ManifoldBasis,
                         delta_a: float = 0.0, chi: float = 0.0,
                         ladder_terms=(), include_ising: bool = True,
                         budget: int = DEFAULT_ED_BUDGET) -> ManyBodyModel:
    """Large-spin XXZ chain on the edge manifold.

    couplings is the symmetric V_ij matrix (rad/s or dimensionless); the
    pair part per unordered bond is V_ij [J_z J_z - 1/4 (J_+ J_- + h.c.)],
    with the Ising block optional for benchmarking its large-spin role.
    """
    couplings = np.asarray(couplings, dtype=float)
    nn = couplings.shape[0]
    d = len(basis)
    check_budget(d**nn, budget)
    site = edge_site_term(basis, delta_a, chi, ladder_terms)
    jz = build_jz(basis, "a").matrix
    jp = build_jpm(basis, "a", +1).matrix
    jm = build_jpm(basis, "a", -1).matrix
    ham = sp.csr_matrix((d**nn, d**nn), dtype=complex)
    for i in range(nn):
        ham = ham + site_operator(site, i, nn, d)
    for i in range(nn):
        for j in range(i + 1, nn):
            v = couplings[i, j]
            if v == 0.0:
                continue
            if include_ising:
                ham = ham + v * pair_operator(jz, jz, i, j, nn, d)
            ham = ham - 0.25 * v * (pair_operator(jp, jm, i, j, nn, d)
                                    + pair_operator(jm, jp, i, j, nn, d))
    return ManyBodyModel(SparseOperator(_realify(ham.tocsr()), hermitian=True),
                         nn, d, "edge_xxz", basis)


def edge_model_from_geometry(geom: LatticeGeometry, basis: ManifoldBasis,
                             delta_a: float = 0.0, chi: float = 0.0,
                             ladder_terms=(), n: int | None = None,
                             include_ising: bool = True,
                             truncation: str = "full",
                             budget: int = DEFAULT_ED_BUDGET) -> ManyBodyModel:
    """Physical-units edge model; requires a planar layout."""
    if not geom.is_planar():
        raise NonPlanarGeometry("edge-manifold model requires theta = pi/2")
    n = n if n is not None else basis.spin.n
    couplings = geom.coupling_matrix(n)
    if truncation == "nn":
        keep = np.zeros_like(couplings, dtype=bool)
        spacing = min(geom.pair_angles(i, j)[0] for i in range(geom.n_sites)
                      for j in range(i + 1, geom.n_sites))
        for i in range(geom.n_sites):
            for j in range(geom.n_sites):
                if i != j and geom.pair_angles(i, j)[0] <= 1.5 * spacing:
                    keep[i, j] = True
        couplings = np.where(keep, couplings, 0.0)
    model = edge_xxz_hamiltonian(couplings, basis, delta_a, chi, ladder_terms,
                                 include_ising, budget)
    return ManyBodyModel(model.hamiltonian, model.n_sites, model.site_dim,
                         "edge_xxz", basis)


# ----------------------------------------------------------------------
# Holstein-Primakoff (two-mode Bose-Hubbard) model
# ----------------------------------------------------------------------

def boson_ops(n_max: int):
    """Truncated annihilation and number operators on dim n_max + 1."""
    a = sp.diags(np.sqrt(np.arange(1, n_max + 1)), 1, format="csr").astype(complex)
    num = sp.diags(np.arange(n_max + 1, dtype=float), format="csr").astype(complex)
    return a, num


def hp_hamiltonian(couplings: np.ndarray, phases: np.ndarray, j_spin: float,
                   n_max: int, delta_a: float = 0.0, delta_b: float = 0.0,
                   include_pair: bool = True, include_density: bool = True,
                   budget: int = DEFAULT_ED_BUDGET) -> ManyBodyModel:
    """Bosonized model near the circular state on truncated two-mode sites.

    Per unordered bond: hopping -h_ij (c_i^dag c_j + h.c.) in both modes with
    h_ij = J V_ij / 2, pair creation with w_ij = 3 J V_ij e^{2 i phi_ij}
    (conjugated to match the spin-model azimuth convention), and
    density-density U_ij = V_ij in (n_a - n_b).
    """
    couplings = np.asarray(couplings, dtype=float)
    nn = couplings.shape[0]
    a, num = boson_ops(n_max)
    eye = sp.identity(n_max + 1, dtype=complex, format="csr")
    ca = sp.kron(a, eye, format="csr")          # mode a of one site
    cb = sp.kron(eye, a, format="csr")          # mode b of one site
    na = sp.kron(num, eye, format="csr")
    nb = sp.kron(eye, num, format="csr")
    d = (n_max + 1) ** 2
    check_budget(d**nn, budget)
    ham = sp.csr_matrix((d**nn, d**nn), dtype=complex)
    onsite = -delta_a * na - delta_b * nb
    for i in range(nn):
        ham = ham + site_operator(onsite, i, nn, d)
    ndiff = na - nb
    for i in range(nn):
        for j in range(i + 1, nn):
            v = couplings[i, j]
            if v == 0.0:
                continue
            h = 0.5 * j_spin * v
            for c in (ca, cb):
                hop = pair_operator(c.conjugate().transpose(), c, i, j, nn, d)
                ham = ham - h * (hop + hop.conjugate().transpose())
            if include_pair:
                w = 3.0 * j_spin * v * np.exp(2j * phases[i, j])
                gain = (pair_operator(ca.conjugate().transpose(),
                                      cb.conjugate().transpose(), i, j, nn, d)
                        + pair_operator(cb.conjugate().transpose(),
                                        ca.conjugate().transpose(), i, j, nn, d))
                ham = ham + 0.5 * (w * gain
                                   + np.conj(w) * gain.conjugate().transpose())
            if include_density:
                ham = ham + v * pair_operator(ndiff, ndiff, i, j, nn, d)
    return ManyBodyModel(SparseOperator(_realify(ham.tocsr()), hermitian=True),
                         nn, d, "holstein_primakoff", None)


# ----------------------------------------------------------------------
# Solvers
# ----------------------------------------------------------------------

@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray


def _norm_estimate(mat: sp.csr_matrix) -> float:
    """Gershgorin-style upper bound on the spectral norm."""
    return float(np.abs(mat).sum(axis=1).max())


def ground_state(h, k: int = 1, maxiter: int | None = None, seed: int = 1234,
                 dense_cutoff: int = 600) -> EigenResult:
    """Lowest-k eigenpairs by Lanczos with full reorthogonalization (ARPACK).

    Eigenpairs are extracted one at a time with deflation of the converged
    vectors, so degenerate multiplets come out as an orthonormal set instead
    of being silently skipped by a single Krylov run.  Residuals are checked
    against 1e-10 times a spectral-norm bound; small problems fall back to
    dense diagonalization.  Start vectors are seeded for reproducible runs.
    """
    mat = h.matrix if isinstance(h, SparseOperator) else sp.csr_matrix(h)
    dim = mat.shape[0]
    hnorm = _norm_estimate(mat)
    if dim <= dense_cutoff or k >= dim - 2:
        evals, evecs = np.linalg.eigh(mat.toarray())
        evals, evecs = evals[:k], evecs[:, :k]
    else:
        rng = np.random.default_rng(seed)
        # shift the spectrum strictly negative: eigenvalues at exactly zero
        # are annihilated by the matvec and invisible to Krylov iterations
        sigma = hnorm + 1.0
        shift = 2.0 * sigma
        found_vals, found_vecs = [], []

        def matvec(x):
            y = mat @ x - sigma * x
            for v in found_vecs:
                y = y + shift * v * np.vdot(v, x)
            return y

        op = spla.LinearOperator((dim, dim), matvec=matvec, dtype=mat.dtype)
        for _ in range(k):
            v0 = rng.normal(size=dim)
            for v in found_vecs:
                v0 = v0 - v * np.vdot(v, v0)
            v0 /= np.linalg.norm(v0)
            try:
                val, vec = spla.eigsh(op, k=1, which="SA", v0=v0,
                                      maxiter=maxiter)
            except spla.ArpackNoConvergence as exc:
                raise NoConvergence(f"Lanczos did not converge: {exc}") from exc
            vec = vec[:, 0]
            for v in found_vecs:  # polish deflation leakage
                vec = vec - v * np.vdot(v, vec)
            vec /= np.linalg.norm(vec)
            found_vals.append(float(np.real(np.vdot(vec, mat @ vec))))
            found_vecs.append(vec)
        order = np.argsort(found_vals)
        evals = np.asarray(found_vals)[order]
        evecs = np.column_stack([found_vecs[i] for i in order])
    # reproducible sign/phase: largest component real positive
    for i in range(evecs.shape[1]):
        anchor = np.argmax(np.abs(evecs[:, i]))
        phase = evecs[anchor, i]
        if phase != 0.0:
            evecs[:, i] *= np.conj(phase) / abs(phase)
    residuals = np.array([np.linalg.norm(mat @ evecs[:, i] - evals[i] * evecs[:, i])
                          for i in range(len(evals))])
    if np.any(residuals > 1e-10 * max(hnorm, 1e-300)):
        raise NoConvergence(
            f"eigenpair residual {residuals.max():.3e} above 1e-10 * |H|")
    return EigenResult(values=np.asarray(evals), vectors=np.asarray(evecs),
                       residuals=residuals)


@dataclass(frozen=True)
class Propagation:
    """Time grid, named observables and accuracy for real-time evolution."""

    times: np.ndarray
    observables: dict = field(default_factory=dict)
    tolerance: float = 1e-10
    substeps: int = 1
    norm_drift_limit: float = 1e-9

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)


def evolve(h, psi0: np.ndarray, prop: Propagation) -> PropagationResult:
    """Krylov propagation of psi0 recording <observable>(t) on the grid."""
    psi0 = np.asarray(psi0, dtype=complex)
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > 1e-9:
        psi0 = psi0 / nrm
    result = propagate(h, psi0, prop.times, observables=prop.observables,
                       substeps=prop.substeps, tol=prop.tolerance)
    if result.norm_drift > prop.norm_drift_limit:
        raise ToleranceFailure(
            f"norm drift {result.norm_drift:.3e} above {prop.norm_drift_limit:.1e}")
    return result


# ----------------------------------------------------------------------
# Symmetry-sector helpers
# ----------------------------------------------------------------------

def total_jz(basis: ManifoldBasis, n_sites: int, which: str = "a") -> sp.csr_matrix:
    jz = build_jz(basis, which)
    d = len(basis)
    out = sp.csr_matrix((d**n_sites, d**n_sites), dtype=complex)
    for i in range(n_sites):
        out = out + site_operator(jz, i, n_sites, d)
    return out.tocsr()

def commutes_with(h, op, tol: float = 1e-10) -> bool:
    """Commutator test used for automatic symmetry-sector detection."""
    a = h.matrix if isinstance(h, SparseOperator) else h
    b = op.matrix if isinstance(op, SparseOperator) else op
    comm = a @ b - b @ a
    if comm.nnz == 0:
        return True
    scale = max(np.abs(a.data).max(), 1e-300) * max(np.abs(b.data).max(), 1e-300)
    return bool(np.abs(comm.data).max() <= tol * scale)


def sector_indices(diagonal: np.ndarray, value: float,
                   tol: float = 1e-9) -> np.ndarray:
    """Indices where a conserved diagonal quantum number takes `value`."""
    return np.nonzero(np.abs(np.asarray(diagonal) - value) < tol)[0]


def project_operator(h, indices: np.ndarray) -> SparseOperator:
    mat = h.matrix if isinstance(h, SparseOperator) else sp.csr_matrix(h)
    sub = mat[np.ix_(indices, indices)].tocsr()
    herm = h.hermitian if isinstance(h, SparseOperator) else False
    return SparseOperator(sub, hermitian=herm)
