"""Geometry, pair interactions, model builders and the solver engine."""

import numpy as np
import pytest

from rydsim import lattice as lat
from rydsim import spinops as so
from rydsim.errors import CoincidentAtoms, EDBudgetExceeded, NonPlanarGeometry


def full_basis(n):
    return so.ManifoldBasis.full(so.SpinLength.from_n(n))


# ----------------------------------------------------------------------
# Geometry
# ----------------------------------------------------------------------

def test_chain_and_ring_distances():
    ring = lat.LatticeGeometry.chain(6, 2e-6, boundary="ring")
    assert np.isclose(ring.pair_angles(0, 5)[0], 2e-6)   # minimum image
    assert np.isclose(ring.pair_angles(0, 3)[0], 6e-6)
    chain = lat.LatticeGeometry.chain(6, 2e-6)
    assert np.isclose(chain.pair_angles(0, 5)[0], 10e-6)


def test_coupling_inverse_cube():
    geom = lat.LatticeGeometry(np.array([[0, 0, 0], [5e-6, 0, 0]]))
    doubled = lat.LatticeGeometry(2.0 * geom.positions)
    v1 = geom.coupling(41, 0, 1)
    v2 = doubled.coupling(41, 0, 1)
    assert v1 == 8.0 * v2


def test_coincident_atoms_raise():
    geom = lat.LatticeGeometry(np.zeros((2, 3)))
    with pytest.raises(CoincidentAtoms):
        geom.pair_angles(0, 1)


def test_ring_couplings_truncations():
    nn = lat.ring_couplings(5, 10.0, truncation="nn")
    assert nn[0, 1] == 10.0 and nn[0, 4] == 10.0 and nn[0, 2] == 0.0
    full = lat.ring_couplings(5, 10.0, truncation="full")
    assert np.isclose(full[0, 2], 10.0 / 8.0)
    open_full = lat.ring_couplings(5, 10.0, boundary="open", truncation="full")
    assert np.isclose(open_full[0, 4], 10.0 / 64.0)


# ----------------------------------------------------------------------
# Dipole-dipole pair operator
# ----------------------------------------------------------------------

def test_dd_axial_ising_coefficient():
    """Two atoms along z: the J_az J_az weight is V (1 - 3 cos^2 theta) = -2V."""
    basis = full_basis(3)
    geom = lat.LatticeGeometry(np.array([[0, 0, 0], [0, 0, 10e-6]]))
    dd = lat.dipole_dipole(geom, basis, 0, 1).to_dense()
    v = geom.coupling(3, 0, 1)
    jz = so.build_jz(basis, "a").to_dense()
    probe = np.kron(jz, jz)
    coeff = np.real(np.sum(dd * probe.conj())) / np.sum(np.abs(probe) ** 2)
    assert np.isclose(coeff, -2.0 * v, rtol=1e-12)


def test_dd_swap_and_hermiticity():
    basis = full_basis(2)
    geom = lat.LatticeGeometry(np.array([[0, 0, 0], [3e-6, 4e-6, 2e-6]]))
    d01 = lat.dipole_dipole(geom, basis, 0, 1)
    d10 = lat.dipole_dipole(geom, basis, 1, 0)
    assert np.abs(d01.to_dense() - d10.to_dense()).max() < 1e-12 * np.abs(d01.to_dense()).max()
    assert d01.hermiticity_defect() < 1e-12 * np.abs(d01.to_dense()).max()


def test_planar_products_match_rotating_frame_reduction():
    """Keep the co-rotating elements of the full coupling; compare term by term.

    In the frame rotating at the shared drive frequency an element survives
    iff it conserves total (m_a - m_b); filtering the full dipole-dipole
    matrix this way must reproduce the planar product decomposition exactly.
    """
    basis = full_basis(3)  # J = 1
    geom = lat.LatticeGeometry(np.array([[0, 0, 0], [7e-6, 3e-6, 0]]))
    _, theta, phi = geom.pair_angles(0, 1)
    assert abs(theta - np.pi / 2) < 1e-12
    v = geom.coupling(3, 0, 1)
    full = lat.dipole_dipole(geom, basis, 0, 1).to_dense() / v
    d = len(basis)
    ma, mb = basis.m_arrays()
    ta = np.repeat(ma, d) + np.tile(ma, d)
    tb = np.repeat(mb, d) + np.tile(mb, d)
    survives = np.abs(np.subtract.outer(ta, ta) - np.subtract.outer(tb, tb)) < 1e-9
    filtered = np.where(survives, full, 0.0)
    total = np.zeros((d * d, d * d), dtype=complex)
    for op_i, op_j, coeff in lat.surviving_pair_products(basis, phi):
        total += coeff * np.kron(op_i.toarray(), op_j.toarray())
    assert np.abs(filtered - total).max() < 1e-12


# ----------------------------------------------------------------------
# Triangular-manifold model
# ----------------------------------------------------------------------

def test_triangular_pair_term_coefficient():
    """J = 1/2, V = 1, phi = 0: the pair block carries its 3/2 weight.

    Assemble (1/2) sum_{i != j} V [Ising - flip-flop/4 + (3/2)(pair + h.c.)]
    literally over ordered pairs and compare with the builder's bond sum.
    """
    spin = so.SpinLength(0.5)
    basis = so.ManifoldBasis.full(spin)
    d = len(basis)
    prods = lat.surviving_pair_products(basis, 0.0)
    built = sum(c * lat.pair_operator(a, b, 0, 1, 2, d)
                for a, b, c in prods).toarray()

    jz = {s: so.build_jz(basis, s).to_dense() for s in "ab"}
    jp = {s: so.build_jpm(basis, s, +1).to_dense() for s in "ab"}
    jm = {s: so.build_jpm(basis, s, -1).to_dense() for s in "ab"}
    eye = np.eye(d)

    def embed(op_i, op_j, i):
        return np.kron(op_i, op_j) if i == 0 else np.kron(op_j, op_i)

    literal = np.zeros((d * d, d * d), dtype=complex)
    for i, j in ((0, 1), (1, 0)):
        zd_i = jz["a"] - jz["b"]
        literal += 0.5 * embed(zd_i, zd_i, i)
        for s in "ab":
            hop = embed(jp[s], jm[s], i)
            literal += 0.5 * (-0.25) * (hop + hop.conj().T)
        pair = embed(jp["a"], jp["b"], i)
        literal += 0.5 * 1.5 * (pair + pair.conj().T)
    assert np.abs(built - literal).max() < 1e-14


def test_triangular_decouples_without_interaction():
    spin = so.SpinLength(0.5)
    basis = so.ManifoldBasis.full(spin)
    from rydsim import manifold as mf
    drive = mf.build_mw(basis, mf.MWDrive(delta_a=0.4, omega_a=0.3 + 0.1j))
    geom = lat.LatticeGeometry(np.array([[0, 0, 0], [1.0, 0, 0]]))  # 1 m apart
    model = lat.triangular_hamiltonian(geom, basis, site_terms=drive, n=3)
    d = len(basis)
    expected = (np.kron(drive.to_dense(), np.eye(d))
                + np.kron(np.eye(d), drive.to_dense()))
    assert np.abs(model.hamiltonian.to_dense() - expected).max() < 1e-9


def test_triangular_symmetries_two_sites():
    """Interaction block conserves total (m_a - m_b) and the parity of m_l."""
    spin = so.SpinLength(0.5)
    basis = so.ManifoldBasis.full(spin)
    geom = lat.LatticeGeometry(np.array([[0, 0, 0], [4e-6, 3e-6, 0]]))
    model = lat.triangular_hamiltonian(geom, basis, n=2)
    h = model.hamiltonian.to_dense()
    scale = np.abs(h).max()
    diff = (lat.total_jz(basis, 2, "a") - lat.total_jz(basis, 2, "b")).toarray()
    tot = (lat.total_jz(basis, 2, "a") + lat.total_jz(basis, 2, "b")).toarray()
    assert np.abs(h @ diff - diff @ h).max() < 1e-12 * scale
    assert np.abs(h @ tot - tot @ h).max() > 1e-3 * scale  # broken by pair term
    parity = np.diag((-1.0) ** np.round(np.diag(tot)).astype(int))
    assert np.abs(h @ parity - parity @ h).max() < 1e-12 * scale


def test_triangular_gauge_covariance():
    """Rotating every bond azimuth by a common angle preserves the spectrum."""
    spin = so.SpinLength(0.5)
    basis = so.ManifoldBasis.full(spin)
    geom1 = lat.LatticeGeometry(np.array([[0, 0, 0], [5e-6, 0, 0]]))
    c, s = np.cos(0.9), np.sin(0.9)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
    geom2 = lat.LatticeGeometry(geom1.positions @ rot.T)
    e1 = np.linalg.eigvalsh(lat.triangular_hamiltonian(geom1, basis, n=2)
                            .hamiltonian.to_dense())
    e2 = np.linalg.eigvalsh(lat.triangular_hamiltonian(geom2, basis, n=2)
                            .hamiltonian.to_dense())
    assert np.abs(e1 - e2).max() < 1e-12 * np.abs(e1).max()


def test_nonplanar_rejected():
    basis = full_basis(2)
    geom = lat.LatticeGeometry(np.array([[0, 0, 0], [0, 1e-6, 1e-6]]))
    with pytest.raises(NonPlanarGeometry):
        lat.triangular_hamiltonian(geom, basis)


# ----------------------------------------------------------------------
# Edge XXZ model
# ----------------------------------------------------------------------

def test_edge_pair_spectrum_dense_oracle():
    """N = 2, J = 1/2, V = 1: spectrum of V[JzJz - (J+J- + h.c.)/4]."""
    spin = so.SpinLength(0.5)
    basis = so.ManifoldBasis.edge_a(spin)
    model = lat.edge_xxz_hamiltonian(np.array([[0.0, 1.0], [1.0, 0.0]]), basis)
    evals = np.sort(np.linalg.eigvalsh(model.hamiltonian.to_dense()))
    # dense 4x4 oracle: triplet |m|=1 at 1/4, m=0 block eigenvalues -1/4 -+ 1/4
    oracle = np.sort([0.25, 0.25, -0.25 + 0.25, -0.25 - 0.25])
    assert np.allclose(evals, oracle, atol=1e-14)


def test_edge_conserves_total_jz_without_drive():
    spin = so.SpinLength(1.0)
    basis = so.ManifoldBasis.edge_a(spin)
    v = lat.ring_couplings(3, 1.0, truncation="full")
    model = lat.edge_xxz_hamiltonian(v, basis, chi=0.3)
    tot = lat.total_jz(basis, 3, "a")
    assert lat.commutes_with(model.hamiltonian, tot)
    driven = lat.edge_xxz_hamiltonian(v, basis, ladder_terms=[(1, 0.2)])
    assert not lat.commutes_with(driven.hamiltonian, tot)


def test_edge_polarized_ground_state_at_large_detuning():
    spin = so.SpinLength(1.5)
    basis = so.ManifoldBasis.edge_a(spin)
    v = lat.ring_couplings(3, 1.0, truncation="nn")
    model = lat.edge_xxz_hamiltonian(v, basis, delta_a=50.0)
    res = lat.ground_state(model.hamiltonian, k=1)
    j = spin.j
    product_energy = -50.0 * 3 * j + 3 * 1.0 * j * j  # ring of 3 bonds
    assert np.isclose(res.values[0], product_energy, rtol=1e-12)
    top = basis.state_index(j, j)
    amp = res.vectors[:, 0][top * len(basis) ** 2 + top * len(basis) + top]
    assert abs(amp) ** 2 > 1.0 - 1e-10


# ----------------------------------------------------------------------
# Holstein-Primakoff model
# ----------------------------------------------------------------------

def test_hp_single_pair_hopping_reduction():
    """Dropping pair/density terms, one boson hops with eigenvalues -+h."""
    v = 1.0
    j_spin = 7.0
    model = lat.hp_hamiltonian(np.array([[0, v], [v, 0.0]]), np.zeros((2, 2)),
                               j_spin, n_max=1, include_pair=False,
                               include_density=False)
    h = model.hamiltonian.to_dense()
    nm = 2
    one_a_site0 = (1 * nm + 0) * model.site_dim + 0
    one_a_site1 = 0 * model.site_dim + (1 * nm + 0)
    block = h[np.ix_([one_a_site0, one_a_site1], [one_a_site0, one_a_site1])]
    evals = np.linalg.eigvalsh(block)
    assert np.allclose(evals, [-j_spin * v / 2.0, j_spin * v / 2.0])


def test_hp_matches_spin_model_as_inverse_j():
    """Expectation values near the circular state approach the spin model as 1/J."""
    v = 1.0
    depth = 5
    labels = [((1, 0), (1, 0)), ((2, 0), (0, 0)), ((0, 0), (2, 0)),
              ((1, 1), (1, 1)), ((2, 1), (0, 1))]
    rels = []
    for j in (10, 20, 40):
        spin = so.SpinLength(float(j))
        basis = so.ManifoldBasis.corner(spin, depth, depth)
        d = len(basis)
        hs = sum(c * lat.pair_operator(a, b, 0, 1, 2, d)
                 for a, b, c in lat.surviving_pair_products(basis, 0.0)) * v
        vec_s = np.zeros(d * d, dtype=complex)
        hp = lat.hp_hamiltonian(np.array([[0, v], [v, 0.0]]), np.zeros((2, 2)),
                                float(j), n_max=depth)
        dh = hp.site_dim
        nm = depth + 1
        vec_h = np.zeros(dh**2, dtype=complex)
        for fa, fb in labels:
            i1 = basis.state_index(j - fa[0], j - fa[1])
            i2 = basis.state_index(j - fb[0], j - fb[1])
            vec_s[i1 * d + i2] += 1.0
            vec_h[(fa[0] * nm + fa[1]) * dh + fb[0] * nm + fb[1]] += 1.0
        vec_s /= np.linalg.norm(vec_s)
        vec_h /= np.linalg.norm(vec_h)
        e_spin = np.vdot(vec_s, hs @ vec_s).real
        e_hp = np.vdot(vec_h, hp.hamiltonian.matrix @ vec_h).real
        rels.append(abs(e_spin - e_hp) / abs(e_hp))
    assert 0.4 < rels[1] / rels[0] < 0.62
    assert 0.4 < rels[2] / rels[1] < 0.62


def test_hp_pair_term_conserves_number_parity():
    model = lat.hp_hamiltonian(np.array([[0, 1.0], [1.0, 0]]), np.zeros((2, 2)),
                               5.0, n_max=2)
    h = model.hamiltonian.to_dense()
    nm = 3
    occ_site = np.add.outer(np.arange(nm), np.arange(nm)).ravel()
    total = np.add.outer(occ_site, occ_site).ravel()
    parity = np.diag((-1.0) ** total)
    assert np.abs(h @ parity - parity @ h).max() < 1e-12 * np.abs(h).max()


def test_hp_truncation_monotone():
    """Raising the per-mode cutoff can only lower the ground-state energy."""
    v = np.array([[0, 1.0], [1.0, 0]])
    phases = np.zeros((2, 2))
    energies = []
    for n_max in (1, 2, 3, 4):
        model = lat.hp_hamiltonian(v, phases, 8.0, n_max=n_max)
        energies.append(lat.ground_state(model.hamiltonian).values[0])
    assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(energies, energies[1:]))


# ----------------------------------------------------------------------
# Solvers
# ----------------------------------------------------------------------

def test_ground_state_diagonal_exact():
    import scipy.sparse as sp
    diag = np.array([3.0, -1.0, 4.0, -5.0, 0.0])
    h = so.SparseOperator(sp.diags(diag.astype(complex)), hermitian=True)
    res = lat.ground_state(h, k=2)
    assert np.allclose(res.values, [-5.0, -1.0])


def test_ground_state_sparse_matches_dense():
    spin = so.SpinLength(0.5)
    basis = so.ManifoldBasis.edge_a(spin)
    v = lat.ring_couplings(4, 1.0, truncation="nn")
    model = lat.edge_xxz_hamiltonian(v, basis, ladder_terms=[(1, 0.17)])
    dense_vals = np.linalg.eigvalsh(model.hamiltonian.to_dense())
    res = lat.ground_state(model.hamiltonian, k=2, dense_cutoff=1)
    assert np.allclose(res.values, dense_vals[:2], atol=1e-9)


def test_ground_state_degenerate_orthonormal():
    import scipy.sparse as sp
    diag = np.array([0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0] + [6.0] * 120)
    h = so.SparseOperator(sp.diags(diag.astype(complex)), hermitian=True)
    res = lat.ground_state(h, k=3, dense_cutoff=1)
    gram = res.vectors.conj().T @ res.vectors
    assert np.abs(gram - np.eye(3)).max() < 1e-10
    assert np.allclose(res.values, [0.0, 0.0, 0.0], atol=1e-10)


def test_evolve_diagonal_phases_and_rabi():
    import scipy.sparse as sp
    h = so.SparseOperator(sp.diags(np.array([0.0, 2.0], dtype=complex)),
                          hermitian=True)
    prop = lat.Propagation(times=np.linspace(0, 3, 7))
    res = lat.evolve(h, np.array([1.0, 1.0]) / np.sqrt(2), prop)
    expected = np.array([1.0, np.exp(-2j * 3.0)]) / np.sqrt(2)
    assert np.abs(res.final_state - expected).max() < 1e-12

    rabi = so.SparseOperator(np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex),
                             hermitian=True)
    proj = so.SparseOperator(np.diag([0.0, 1.0]).astype(complex), hermitian=True)
    times = np.linspace(0, 20, 41)
    res = lat.evolve(rabi, np.array([1.0, 0.0], dtype=complex),
                     lat.Propagation(times=times, observables={"p": proj}))
    assert np.abs(res.expectations["p"].real - np.sin(times / 2) ** 2).max() < 1e-10


def test_evolve_conserves_energy():
    spin = so.SpinLength(1.0)
    basis = so.ManifoldBasis.edge_a(spin)
    v = lat.ring_couplings(4, 1.0, truncation="nn")
    model = lat.edge_xxz_hamiltonian(v, basis, chi=0.5, ladder_terms=[(1, 0.3)])
    rng = np.random.default_rng(11)
    psi = rng.normal(size=3**4) + 1j * rng.normal(size=3**4)
    psi /= np.linalg.norm(psi)
    ham = model.hamiltonian
    prop = lat.Propagation(times=np.linspace(0, 5, 11),
                           observables={"h": ham})
    res = lat.evolve(ham, psi, prop)
    energies = res.expectations["h"].real
    assert np.abs(energies - energies[0]).max() < 1e-9 * max(1.0, abs(energies[0]))
    assert res.norm_drift < 1e-9


def test_budget_guard():
    spin = so.SpinLength(10)
    basis = so.ManifoldBasis.edge_a(spin)
    v = lat.ring_couplings(6, 1.0)
    with pytest.raises(EDBudgetExceeded):
        lat.edge_xxz_hamiltonian(v, basis)
