"""Two commuting angular momenta on a single n-manifold.

A manifold with principal quantum number n carries two angular momenta of
equal length J = (n-1)/2.  States are labelled |J, m_a, m_b> and ordered
lexicographically in (m_a, m_b), ascending; every serialized vector in the
package relies on that ordering.  Restricted manifolds (triangular, edge,
vertical) are index subsets of the full n^2 states; ladder operators built
on a restricted basis silently drop transitions that leave it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, OrthonormalityLost

HERMITICITY_TOL = 1e-12
CG_DEFECT_LIMIT = 1e-9
CG_MAX_N = 61


def _half_int_key(m: float) -> int:
    """Exact dictionary key for a half-integer value."""
    return int(round(2.0 * m))


@dataclass(frozen=True)
class SpinLength:
    """Angular momentum length J with its principal quantum number n = 2J + 1."""

    j: float

    def __post_init__(self):
        twoj = round(2.0 * self.j)
        if abs(2.0 * self.j - twoj) > 1e-12 or twoj < 0:
            raise ValueError(f"J must be a non-negative half-integer, got {self.j}")
        object.__setattr__(self, "j", twoj / 2.0)

    @classmethod
    def from_n(cls, n: int) -> "SpinLength":
        if n < 1:
            raise ValueError(f"principal quantum number must be >= 1, got {n}")
        return cls((n - 1) / 2.0)

    @property
    def n(self) -> int:
        return int(round(2.0 * self.j)) + 1

    def m_values(self) -> np.ndarray:
        """All projections -J..J in ascending order."""
        return -self.j + np.arange(self.n)


@dataclass(frozen=True)
class ManifoldBasis:
    """Ordered set of (m_a, m_b) states for one atom.

    kind is one of 'full', 'triangular', 'edge_a', 'edge_b', 'vertical' or
    'custom'; lstar records the threshold used to cut the manifold (None for
    'full' and 'custom').
    """

    spin: SpinLength
    kind: str
    lstar: int | None
    states: tuple[tuple[float, float], ...]
    _index: dict = field(repr=False, hash=False, compare=False, default=None)

    def __post_init__(self):
        index = {(_half_int_key(ma), _half_int_key(mb)): i
                 for i, (ma, mb) in enumerate(self.states)}
        if len(index) != len(self.states):
            raise ValueError("duplicate states in basis")
        object.__setattr__(self, "_index", index)

    # -- constructors -------------------------------------------------

    @classmethod
    def full(cls, spin: SpinLength) -> "ManifoldBasis":
        ms = spin.m_values()
        states = tuple((ma, mb) for ma in ms for mb in ms)
        return cls(spin, "full", None, states)

    @classmethod
    def triangular(cls, spin: SpinLength, lstar: int) -> "ManifoldBasis":
        """States with m_a + m_b >= lstar (right corner of the rhombus)."""
        ms = spin.m_values()
        states = tuple((ma, mb) for ma in ms for mb in ms if ma + mb >= lstar - 1e-9)
        return cls(spin, "triangular", lstar, states)

    @classmethod
    def edge_a(cls, spin: SpinLength, lstar: int = 0) -> "ManifoldBasis":
        """m_b pinned to J; remaining ladder in m_a with m_a + J >= lstar."""
        states = tuple((ma, spin.j) for ma in spin.m_values()
                       if ma + spin.j >= lstar - 1e-9)
        return cls(spin, "edge_a", lstar, states)

    @classmethod
    def edge_b(cls, spin: SpinLength, lstar: int = 0) -> "ManifoldBasis":
        states = tuple((spin.j, mb) for mb in spin.m_values()
                       if mb + spin.j >= lstar - 1e-9)
        return cls(spin, "edge_b", lstar, states)

    @classmethod
    def vertical(cls, spin: SpinLength, lstar: int) -> "ManifoldBasis":
        """Anti-diagonal m_a + m_b = lstar, ordered by ascending m_a."""
        states = tuple((ma, lstar - ma) for ma in spin.m_values()
                       if abs(lstar - ma) <= spin.j + 1e-9)
        return cls(spin, "vertical", lstar, states)

    @classmethod
    def corner(cls, spin: SpinLength, depth_a: int, depth_b: int) -> "ManifoldBasis":
        """Box m_a >= J - depth_a, m_b >= J - depth_b around the circular state.

        Useful when the dynamics provably stays near |J, J>; operators on this
        basis are the full-basis operators projected to the box.
        """
        ms = spin.m_values()
        states = tuple((ma, mb) for ma in ms for mb in ms
                       if ma >= spin.j - depth_a - 1e-9 and mb >= spin.j - depth_b - 1e-9)
        return cls(spin, "custom", None, states)

    @classmethod
    def from_states(cls, spin: SpinLength, states) -> "ManifoldBasis":
        return cls(spin, "custom", None, tuple((float(a), float(b)) for a, b in states))

    # -- queries -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.states)

    def index_of(self, ma: float, mb: float) -> int | None:
        return self._index.get((_half_int_key(ma), _half_int_key(mb)))

    def m_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        arr = np.asarray(self.states, dtype=float).reshape(len(self.states), 2)
        return arr[:, 0], arr[:, 1]

    def state_index(self, ma: float, mb: float) -> int:
        i = self.index_of(ma, mb)
        if i is None:
            raise KeyError(f"state ({ma}, {mb}) not in basis")
        return i


class SparseOperator:
    """Complex sparse matrix with dimension and hermiticity metadata.

    Thin wrapper over a scipy CSR matrix; `apply` performs y = A x with the
    fixed per-row summation order of the CSR layout.
    """

    __slots__ = ("dim", "matrix", "hermitian")

    def __init__(self, matrix, hermitian: bool = False, check: bool = False):
        matrix = sp.csr_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"operator must be square, got {matrix.shape}")
        self.dim = matrix.shape[0]
        self.matrix = matrix
        self.hermitian = bool(hermitian)
        if check and hermitian:
            defect = self.hermiticity_defect()
            if defect > HERMITICITY_TOL:
                raise ValueError(f"hermiticity defect {defect:.3e} above tolerance")

    @classmethod
    def from_coo(cls, dim: int, rows, cols, vals, hermitian: bool = False,
                 check: bool = False) -> "SparseOperator":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if len(rows) and (rows.max() >= dim or cols.max() >= dim or rows.min() < 0):
            raise DimensionMismatch("coordinate index outside operator dimension")
        mat = sp.coo_matrix((np.asarray(vals, dtype=complex), (rows, cols)),
                            shape=(dim, dim))
        return cls(mat.tocsr(), hermitian=hermitian, check=check)

    @classmethod
    def identity(cls, dim: int) -> "SparseOperator":
        return cls(sp.identity(dim, dtype=complex, format="csr"), hermitian=True)

    def coo_triples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def apply(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec)
        if vec.shape[0] != self.dim:
            raise DimensionMismatch(
                f"vector of length {vec.shape[0]} against operator dim {self.dim}")
        return self.matrix @ vec

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def dagger(self) -> "SparseOperator":
        return SparseOperator(self.matrix.conjugate().transpose().tocsr(),
                              hermitian=self.hermitian)

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conjugate().transpose()
        return 0.0 if diff.nnz == 0 else float(np.abs(diff.data).max())

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        if self.dim != other.dim:
            raise DimensionMismatch("operator dimensions differ")
        return SparseOperator(self.matrix + other.matrix,
                              hermitian=self.hermitian and other.hermitian)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        if self.dim != other.dim:
            raise DimensionMismatch("operator dimensions differ")
        return SparseOperator(self.matrix - other.matrix,
                              hermitian=self.hermitian and other.hermitian)

    def __mul__(self, scalar: complex) -> "SparseOperator":
        herm = self.hermitian and abs(complex(scalar).imag) == 0.0
        return SparseOperator(self.matrix * scalar, hermitian=herm)

    __rmul__ = __mul__

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        if self.dim != other.dim:
            raise DimensionMismatch("operator dimensions differ")
        return SparseOperator(self.matrix @ other.matrix, hermitian=False)


def apply(op: SparseOperator, vec: np.ndarray) -> np.ndarray:
    """y = A x (deterministic per-row summation)."""
    return op.apply(vec)


# ----------------------------------------------------------------------
# Ladder arithmetic
# ----------------------------------------------------------------------

def ladder_factor(j: float, m: float, delta: int) -> float:
    """<m+delta| J_+- |m> = sqrt(j(j+1) - m(m+delta)) for delta = +-1."""
    val = j * (j + 1.0) - m * (m + delta)
    return math.sqrt(val) if val > 0.0 else 0.0


def ladder_power_element(j: float, m: float, kappa: int) -> float:
    """Matrix element <m+kappa| (J_+)^kappa |m>, with (J_+)^-k meaning (J_-)^k.

    Zero whenever the target projection leaves [-j, j].
    """
    if kappa == 0:
        return 1.0
    if abs(m + kappa) > j + 1e-9:
        return 0.0
    out = 1.0
    step = 1 if kappa > 0 else -1
    cur = m
    for _ in range(abs(kappa)):
        out *= ladder_factor(j, cur, step)
        cur += step
    return out


def build_jz(basis: ManifoldBasis, which: str) -> SparseOperator:
    """Diagonal J_{a,z} or J_{b,z} on the given basis."""
    ma, mb = basis.m_arrays()
    diag = ma if which == "a" else mb
    return SparseOperator(sp.diags(diag.astype(complex), format="csr"), hermitian=True)


def build_jpm(basis: ManifoldBasis, which: str, sign: int) -> SparseOperator:
    """Ladder operator J_{a/b,+-}; transitions leaving the basis are dropped."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    j = basis.spin.j
    rows, cols, vals = [], [], []
    for col, (ma, mb) in enumerate(basis.states):
        m = ma if which == "a" else mb
        coeff = ladder_factor(j, m, sign)
        if coeff == 0.0:
            continue
        if which == "a":
            row = basis.index_of(ma + sign, mb)
        else:
            row = basis.index_of(ma, mb + sign)
        if row is None:
            continue  # projected manifold: out-of-basis transition dropped
        rows.append(row)
        cols.append(col)
        vals.append(coeff)
    return SparseOperator.from_coo(len(basis), rows, cols, vals, hermitian=False)


def build_cartesian(basis: ManifoldBasis, which: str):
    """(J_x, J_y, J_z) for one species on the given basis."""
    jp = build_jpm(basis, which, +1)
    jm = build_jpm(basis, which, -1)
    jx = SparseOperator((jp.matrix + jm.matrix) * 0.5, hermitian=True)
    jy = SparseOperator((jp.matrix - jm.matrix) * (-0.5j), hermitian=True)
    return jx, jy, build_jz(basis, which)


def ladder_power(basis: ManifoldBasis, kappa_a: int, kappa_b: int) -> SparseOperator:
    """(J_{a,+})^kappa_a (J_{b,+})^kappa_b projected to the basis.

    Matrix elements are the closed-form products of ladder factors, so the
    projection only removes rows/columns, never intermediate legs.
    """
    j = basis.spin.j
    rows, cols, vals = [], [], []
    for col, (ma, mb) in enumerate(basis.states):
        va = ladder_power_element(j, ma, kappa_a)
        if va == 0.0:
            continue
        vb = ladder_power_element(j, mb, kappa_b)
        if vb == 0.0:
            continue
        row = basis.index_of(ma + kappa_a, mb + kappa_b)
        if row is None:
            continue
        rows.append(row)
        cols.append(col)
        vals.append(va * vb)
    return SparseOperator.from_coo(len(basis), rows, cols, vals, hermitian=False)


# ----------------------------------------------------------------------
# Coupling two spin-J systems to total L
# ----------------------------------------------------------------------

@dataclass
class CGTable:
    """Coupling coefficients <J m_a; J m_b | l m_l> for l = 0..2J.

    Organised per m_l block; within a block, rows follow the lexicographic
    (m_a, m_b) order restricted to m_a + m_b = m_l and columns are labelled
    by l descending from 2J to |m_l|.  Signs follow the Condon-Shortley
    convention (coefficient at maximal m_a positive for the top state).
    """

    spin: SpinLength
    blocks: dict  # m_l (int) -> (states, ls, matrix)

    def block(self, m_l: int):
        return self.blocks[int(m_l)]

    def coefficient(self, l: int, m_l: int, ma: float, mb: float) -> float:
        if abs(ma + mb - m_l) > 1e-9:
            return 0.0
        states, ls, mat = self.blocks[int(m_l)]
        try:
            r = states.index((ma, mb))
            c = ls.index(l)
        except ValueError:
            return 0.0
        return float(mat[r, c])

    def coupled_vector(self, l: int, m_l: int, basis: ManifoldBasis) -> np.ndarray:
        """|l, m_l> expressed over the given (m_a, m_b) basis."""
        vec = np.zeros(len(basis), dtype=float)
        states, ls, mat = self.blocks[int(m_l)]
        c = ls.index(l)
        for r, (ma, mb) in enumerate(states):
            i = basis.index_of(ma, mb)
            if i is not None:
                vec[i] = mat[r, c]
        return vec

    def orthonormality_defect(self) -> float:
        worst = 0.0
        for states, ls, mat in self.blocks.values():
            gram = mat.T @ mat
            worst = max(worst, float(np.abs(gram - np.eye(len(ls))).max()))
        return worst


def cg_transform(spin: SpinLength, max_n: int = CG_MAX_N) -> CGTable:
    """Couple two spin-J systems to total L.

    Within each m_l block the total L^2 operator is a real symmetric
    tridiagonal matrix; its eigenvectors (eigenvalues l(l+1)) give the
    coupling coefficients to machine precision.  Signs are then chained to
    the Condon-Shortley convention: the top state of each multiplet has a
    positive coefficient at maximal m_a, lower states follow by explicit
    lowering, which doubles as an orthonormality/consistency guard.
    """
    if spin.n > max_n:
        raise ValueError(f"n = {spin.n} beyond configured coupling limit {max_n}")
    j = spin.j
    twoj = int(round(2 * j))
    jsq = j * (j + 1.0)

    def block_states(m_l: int):
        out = []
        ma = max(-j, m_l - j)
        while ma <= min(j, m_l + j) + 1e-9:
            out.append((ma, m_l - ma))
            ma += 1.0
        return out

    block_cache = {m_l: block_states(m_l) for m_l in range(-twoj, twoj + 1)}
    pos_cache = {
        m_l: {(_half_int_key(a), _half_int_key(b)): i for i, (a, b) in enumerate(states)}
        for m_l, states in block_cache.items()
    }

    def lower(vec: np.ndarray, m_l: int) -> np.ndarray:
        """Apply L_- = J_a- + J_b- from block m_l to block m_l - 1 (unnormalised)."""
        src = block_cache[m_l]
        dst_pos = pos_cache[m_l - 1]
        out = np.zeros(len(block_cache[m_l - 1]))
        for i, (ma, mb) in enumerate(src):
            c = vec[i]
            if c == 0.0:
                continue
            fa = ladder_factor(j, ma, -1)
            if fa != 0.0:
                out[dst_pos[(_half_int_key(ma - 1), _half_int_key(mb))]] += c * fa
            fb = ladder_factor(j, mb, -1)
            if fb != 0.0:
                out[dst_pos[(_half_int_key(ma), _half_int_key(mb - 1))]] += c * fb
        return out

    # eigen-decompose L^2 per block; columns sorted as l = 2J..|m_l|
    raw_blocks = {}
    for m_l in range(-twoj, twoj + 1):
        states = block_cache[m_l]
        dim = len(states)
        diag = np.array([2.0 * jsq + 2.0 * ma * mb for ma, mb in states])
        off = np.array([ladder_factor(j, states[i][0], +1)
                        * ladder_factor(j, states[i][1], -1)
                        for i in range(dim - 1)])
        lsq = np.diag(diag)
        if dim > 1:
            lsq += np.diag(off, 1) + np.diag(off, -1)
        evals, evecs = np.linalg.eigh(lsq)
        raw_blocks[m_l] = (states, evals[::-1], evecs[:, ::-1])

    # chain signs by lowering from each multiplet's top state
    vectors: dict[int, dict[int, np.ndarray]] = {l: {} for l in range(twoj + 1)}
    worst = 0.0
    for m_l in range(twoj, -twoj - 1, -1):
        states, evals, evecs = raw_blocks[m_l]
        ls = list(range(twoj, abs(m_l) - 1, -1))
        for c, l in enumerate(ls):
            worst = max(worst, abs(evals[c] - l * (l + 1.0)))
            vec = evecs[:, c]
            if m_l == l:
                anchor = max(range(len(states)), key=lambda i: states[i][0])
                if vec[anchor] < 0.0:
                    vec = -vec
            else:
                ref = lower(vectors[l][m_l + 1], m_l + 1)
                overlap = float(ref @ vec)
                expect = ladder_factor(float(l), float(m_l + 1), -1)
                worst = max(worst, abs(abs(overlap) - expect))
                if overlap < 0.0:
                    vec = -vec
            vectors[l][m_l] = vec

    blocks = {}
    for m_l in range(-twoj, twoj + 1):
        states = block_cache[m_l]
        ls = list(range(twoj, abs(m_l) - 1, -1))
        mat = np.column_stack([vectors[l][m_l] for l in ls])
        blocks[m_l] = (states, ls, mat)

    table = CGTable(spin, blocks)
    defect = max(table.orthonormality_defect(), worst / max(1.0, 2.0 * jsq))
    if defect > CG_DEFECT_LIMIT:
        raise OrthonormalityLost(
            f"coupled-basis construction lost orthonormality: defect {defect:.3e}")
    return table
