"""Angular-momentum algebra, basis bookkeeping and the coupled-basis table."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydsim import spinops as so
from rydsim.errors import DimensionMismatch

HALF_INTS = st.integers(min_value=1, max_value=12).map(lambda t: t / 2.0)


def dense(op):
    return op.to_dense()


# ----------------------------------------------------------------------
# SpinLength / ManifoldBasis
# ----------------------------------------------------------------------

def test_spin_length_n_relation():
    assert so.SpinLength(0.5).n == 2
    assert so.SpinLength(10).n == 21
    assert so.SpinLength.from_n(31).j == 15.0
    with pytest.raises(ValueError):
        so.SpinLength(0.3)
    with pytest.raises(ValueError):
        so.SpinLength(-1.0)


def test_full_basis_is_lexicographic_and_complete():
    b = so.ManifoldBasis.full(so.SpinLength(1))
    assert len(b) == 9
    assert b.states[0] == (-1.0, -1.0)
    assert b.states[1] == (-1.0, 0.0)
    assert b.states[-1] == (1.0, 1.0)
    for i, (ma, mb) in enumerate(b.states):
        assert b.index_of(ma, mb) == i


@given(twoj=st.integers(min_value=1, max_value=9), lstar=st.integers(min_value=0, max_value=4))
def test_restricted_bases_match_definitions(twoj, lstar):
    spin = so.SpinLength(twoj / 2.0)
    tri = so.ManifoldBasis.triangular(spin, lstar)
    assert all(ma + mb >= lstar for ma, mb in tri.states)
    assert len(tri) == sum(1 for ma in spin.m_values() for mb in spin.m_values()
                           if ma + mb >= lstar)
    edge = so.ManifoldBasis.edge_a(spin, lstar)
    assert all(mb == spin.j and ma + mb >= lstar for ma, mb in edge.states)
    vert = so.ManifoldBasis.vertical(spin, lstar)
    assert all(ma + mb == lstar for ma, mb in vert.states)


# ----------------------------------------------------------------------
# Operators
# ----------------------------------------------------------------------

def test_jz_eigenvalues_spin_half():
    b = so.ManifoldBasis.full(so.SpinLength(0.5))
    jza = so.build_jz(b, "a")
    assert np.allclose(dense(jza).diagonal(), [-0.5, -0.5, 0.5, 0.5])
    jzb = so.build_jz(b, "b")
    assert np.allclose(dense(jzb).diagonal(), [-0.5, 0.5, -0.5, 0.5])


def test_jz_degeneracy_and_trace():
    b = so.ManifoldBasis.full(so.SpinLength(1))
    diag = dense(so.build_jz(b, "b")).diagonal().real
    for m in (-1.0, 0.0, 1.0):
        assert np.sum(np.isclose(diag, m)) == 3
    assert abs(diag.sum()) < 1e-14


def test_ladder_spin_half_and_spin_one():
    b = so.ManifoldBasis.full(so.SpinLength(0.5))
    jp = so.build_jpm(b, "a", +1)
    src = b.state_index(-0.5, 0.5)
    dst = b.state_index(0.5, 0.5)
    assert np.isclose(dense(jp)[dst, src], 1.0)

    b1 = so.ManifoldBasis.full(so.SpinLength(1))
    jp1 = so.build_jpm(b1, "a", +1)
    elem = dense(jp1)[b1.state_index(0, 1), b1.state_index(-1, 1)]
    assert np.isclose(elem, np.sqrt(2.0))


@given(twoj=st.integers(min_value=1, max_value=8))
@settings(deadline=None)
def test_ladder_commutator(twoj):
    """[J_+, J_-] = 2 J_z on the full basis (dense oracle)."""
    b = so.ManifoldBasis.full(so.SpinLength(twoj / 2.0))
    jp = dense(so.build_jpm(b, "a", +1))
    jm = dense(so.build_jpm(b, "a", -1))
    jz = dense(so.build_jz(b, "a"))
    assert np.abs(jp @ jm - jm @ jp - 2.0 * jz).max() < 1e-12


@pytest.mark.parametrize("twoj", range(1, 21))
def test_so4_commutators_and_casimirs(twoj):
    """SU(2)xSU(2) algebra and fixed lengths for every J up to 10."""
    spin = so.SpinLength(twoj / 2.0)
    b = so.ManifoldBasis.full(spin)
    ops = {"a": so.build_cartesian(b, "a"), "b": so.build_cartesian(b, "b")}
    eye = np.eye(len(b))
    jsq = spin.j * (spin.j + 1.0)
    for s in ("a", "b"):
        jx, jy, jz = (dense(o) for o in ops[s])
        assert np.abs(jx @ jy - jy @ jx - 1j * jz).max() < 1e-12
        assert np.abs(jy @ jz - jz @ jy - 1j * jx).max() < 1e-12
        assert np.abs(jz @ jx - jx @ jz - 1j * jy).max() < 1e-12
        assert np.abs(jx @ jx + jy @ jy + jz @ jz - jsq * eye).max() < 1e-12
    for u in (dense(o) for o in ops["a"]):
        for v in (dense(o) for o in ops["b"]):
            assert np.abs(u @ v - v @ u).max() < 1e-12


def test_projected_operators_match_full_basis_projection():
    spin = so.SpinLength(2)
    full = so.ManifoldBasis.full(spin)
    tri = so.ManifoldBasis.triangular(spin, 1)
    sel = np.array([full.state_index(ma, mb) for ma, mb in tri.states])
    for which in ("a", "b"):
        for sign in (+1, -1):
            proj = dense(so.build_jpm(tri, which, sign))
            fullop = dense(so.build_jpm(full, which, sign))[np.ix_(sel, sel)]
            assert np.abs(proj - fullop).max() == 0.0


def test_apply_identity_and_eigenstate():
    b = so.ManifoldBasis.full(so.SpinLength(1.5))
    vec = np.arange(len(b), dtype=complex)
    assert np.array_equal(so.apply(so.SparseOperator.identity(len(b)), vec), vec)
    jz = so.build_jz(b, "a")
    basis_vec = np.zeros(len(b), dtype=complex)
    basis_vec[b.state_index(0.5, -0.5)] = 1.0
    assert np.allclose(so.apply(jz, basis_vec), 0.5 * basis_vec)


def test_apply_ladder_identity_random_vectors():
    """J_+ J_- acts as J(J+1) - m^2 + m on each projection (J = 5)."""
    spin = so.SpinLength(5)
    b = so.ManifoldBasis.full(spin)
    jp = so.build_jpm(b, "a", +1)
    jm = so.build_jpm(b, "a", -1)
    ma, _ = b.m_arrays()
    scale = spin.j * (spin.j + 1.0) - ma**2 + ma
    rng = np.random.default_rng(7)
    for _ in range(5):
        v = rng.normal(size=len(b)) + 1j * rng.normal(size=len(b))
        lhs = so.apply(jp, so.apply(jm, v))
        assert np.abs(lhs - scale * v).max() < 1e-12 * np.abs(v).max() * scale.max()


def test_apply_dimension_mismatch():
    b = so.ManifoldBasis.full(so.SpinLength(0.5))
    with pytest.raises(DimensionMismatch):
        so.build_jz(b, "a").apply(np.zeros(3))


def test_ladder_power_matches_dense_powers():
    """Closed-form ladder products equal dense matrix powers for J <= 8."""
    for twoj in (2, 5, 9, 16):
        spin = so.SpinLength(twoj / 2.0)
        b = so.ManifoldBasis.full(spin)
        jpa = dense(so.build_jpm(b, "a", +1))
        jmb = dense(so.build_jpm(b, "b", -1))
        target = np.linalg.matrix_power(jpa, 2) @ np.linalg.matrix_power(jmb, 1)
        built = dense(so.ladder_power(b, 2, -1))
        assert np.abs(built - target).max() < 1e-10


# ----------------------------------------------------------------------
# Coupled basis
# ----------------------------------------------------------------------

def test_cg_singlet_and_stretched():
    t = so.cg_transform(so.SpinLength(0.5))
    s = 1.0 / np.sqrt(2.0)
    assert np.isclose(abs(t.coefficient(0, 0, 0.5, -0.5)), s)
    assert np.isclose(t.coefficient(0, 0, 0.5, -0.5),
                      -t.coefficient(0, 0, -0.5, 0.5))
    assert np.isclose(t.coefficient(1, 1, 0.5, 0.5), 1.0)


def test_cg_orthonormality_j10():
    t = so.cg_transform(so.SpinLength(10))
    assert t.orthonormality_defect() < 1e-10


@given(twoj=st.integers(min_value=1, max_value=16))
@settings(deadline=None, max_examples=16)
def test_cg_blocks_unitary(twoj):
    t = so.cg_transform(so.SpinLength(twoj / 2.0))
    assert t.orthonormality_defect() < 1e-12


def test_cg_limit_guard():
    with pytest.raises(ValueError):
        so.cg_transform(so.SpinLength.from_n(63))


def test_cg_diagonalizes_lz():
    """The coupled basis diagonalises L_z = J_az + J_bz with eigenvalue m_l."""
    spin = so.SpinLength(1.5)
    b = so.ManifoldBasis.full(spin)
    t = so.cg_transform(spin)
    lz = dense(so.build_jz(b, "a")) + dense(so.build_jz(b, "b"))
    twoj = int(2 * spin.j)
    for m_l in range(-twoj, twoj + 1):
        _, ls, _ = t.block(m_l)
        for l in ls:
            v = t.coupled_vector(l, m_l, b)
            assert np.abs(lz @ v - m_l * v).max() < 1e-12
