"""Fock basis of N bosons on three sites and the trimer Hamiltonian.

Basis states are occupation triples ``(n1, n2, n3)`` with ``n3 = N - n1 - n2``,
ordered lexicographically in ``(n1, n2)``.  The Hamiltonian is

    H = V n2 + (U/2) sum_i n_i^2 - (Omega/2) (a2^+ a1 + a3^+ a2 + h.c.)

with ``U = u Omega / N`` and ``V = v Omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import InvalidArgument

#: Bumped whenever the basis ordering changes; part of every cache key.
BASIS_ORDER_VERSION = 1


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless trimer parameters ``u = N U / Omega`` and ``v = V / Omega``."""

    N: int
    u: float
    v: float
    omega: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgument(f"N must be a positive integer, got {self.N!r}")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise InvalidArgument(f"omega must be positive and finite, got {self.omega!r}")
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise InvalidArgument("u and v must be finite")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def U(self) -> float:
        return self.u * self.omega / self.N

    @property
    def V(self) -> float:
        return self.v * self.omega

    def with_(self, **changes) -> "ModelParams":
        fields = dict(N=self.N, u=self.u, v=self.v, omega=self.omega)
        fields.update(changes)
        return ModelParams(**fields)


class FockState(NamedTuple):
    n1: int
    n2: int
    n3: int

    @property
    def N(self) -> int:
        return self.n1 + self.n2 + self.n3


def dimension(N: int) -> int:
    """Hilbert space dimension (N+1)(N+2)/2."""
    if int(N) != N or N < 1:
        raise InvalidArgument(f"N must be a positive integer, got {N!r}")
    N = int(N)
    return (N + 1) * (N + 2) // 2


def _offset(N: int, n1):
    # number of states with first occupation < n1
    return n1 * (N + 1) - n1 * (n1 - 1) // 2


class FockBasis:
    """Lexicographically ordered basis with O(1) index arithmetic.

    The occupation columns ``n1``, ``n2``, ``n3`` are read-only integer arrays.
    """

    def __init__(self, N: int):
        self.N = int(N)
        self.size = dimension(N)
        n1 = np.repeat(np.arange(self.N + 1), np.arange(self.N + 1, 0, -1))
        n2 = np.concatenate([np.arange(self.N + 1 - k) for k in range(self.N + 1)])
        self.n1 = n1.astype(np.int64)
        self.n2 = n2.astype(np.int64)
        self.n3 = (self.N - self.n1 - self.n2).astype(np.int64)
        for arr in (self.n1, self.n2, self.n3):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"FockBasis(N={self.N}, size={self.size})"

    @property
    def occupations(self) -> np.ndarray:
        """``(size, 3)`` array of occupation triples."""
        return np.stack([self.n1, self.n2, self.n3], axis=1)

    @property
    def states(self) -> list[FockState]:
        return [FockState(int(a), int(b), int(c)) for a, b, c in self.occupations]

    def state(self, idx: int) -> FockState:
        if not 0 <= idx < self.size:
            raise IndexError(f"basis index {idx} out of range for size {self.size}")
        return FockState(int(self.n1[idx]), int(self.n2[idx]), int(self.n3[idx]))

    def index(self, state) -> int:
        n1, n2 = int(state[0]), int(state[1])
        if len(state) > 2 and n1 + n2 + int(state[2]) != self.N:
            raise InvalidArgument(f"{tuple(state)} does not hold N={self.N} particles")
        if n1 < 0 or n2 < 0 or n1 + n2 > self.N:
            raise InvalidArgument(f"{tuple(state)} is outside the basis")
        return int(_offset(self.N, n1) + n2)

    def indices(self, n1, n2) -> np.ndarray:
        """Vectorized ``index`` for arrays of occupations (no range checks)."""
        n1 = np.asarray(n1, dtype=np.int64)
        return _offset(self.N, n1) + np.asarray(n2, dtype=np.int64)

    def fingerprint(self) -> str:
        return f"N={self.N};order=lex(n1,n2);v{BASIS_ORDER_VERSION}"

    def mirror_permutation(self) -> np.ndarray:
        """Index map of the site 1 <-> site 3 reflection: ``perm[i]`` is the image of ``i``."""
        return self.indices(self.n3, self.n2)

    def hop_pairs(self, src: int, dst: int):
        """Basis pairs connected by ``a_dst^+ a_src``.

        Returns ``(i, j, amp)`` such that ``a_dst^+ a_src |i> = amp |j>``.
        """
        occ = self.occupations
        i = np.nonzero(occ[:, src] > 0)[0]
        new = occ[i].copy()
        amp = np.sqrt(new[:, src] * (new[:, dst] + 1.0))
        new[:, src] -= 1
        new[:, dst] += 1
        j = self.indices(new[:, 0], new[:, 1])
        return i, j, amp


def build_basis(N: int) -> FockBasis:
    return FockBasis(N)


def hamiltonian_entries(basis: FockBasis, params: ModelParams):
    """Upper-triangle-plus-diagonal COO triplets ``(rows, cols, values)`` of H.

    Every off-diagonal element is emitted once, with ``row < col``; a consumer
    mirrors it.  Any storage backend can be filled from these.
    """
    if basis.N != params.N:
        raise InvalidArgument(f"basis holds N={basis.N} but params.N={params.N}")
    n1, n2, n3 = (a.astype(float) for a in (basis.n1, basis.n2, basis.n3))
    diag = params.V * n2 + 0.5 * params.U * (n1**2 + n2**2 + n3**2)
    rows = [np.arange(basis.size)]
    cols = [np.arange(basis.size)]
    vals = [diag]
    # a2^+ a1 and a3^+ a2; Hermitian partners are supplied by mirroring
    for src, dst in ((0, 1), (1, 2)):
        i, j, amp = basis.hop_pairs(src, dst)
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        rows.append(lo)
        cols.append(hi)
        vals.append(-0.5 * params.omega * amp)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def assemble(basis: FockBasis, params: ModelParams, set_entry: Callable[[int, int, float], None]):
    """Feed every nonzero of H, both triangles, to ``set_entry(i, j, value)``."""
    for r, c, x in zip(*hamiltonian_entries(basis, params)):
        set_entry(int(r), int(c), float(x))
        if r != c:
            set_entry(int(c), int(r), float(x))


class HamiltonianMatrix:
    """Dense real symmetric trimer Hamiltonian together with its parameters."""

    def __init__(self, matrix: np.ndarray, basis: FockBasis, params: ModelParams):
        self.matrix = matrix
        self.basis = basis
        self.params = params
        matrix.flags.writeable = False

    @property
    def shape(self):
        return self.matrix.shape

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def build_hamiltonian(basis: FockBasis, params: ModelParams) -> HamiltonianMatrix:
    rows, cols, vals = hamiltonian_entries(basis, params)
    H = np.zeros((basis.size, basis.size))
    H[rows, cols] = vals
    H[cols, rows] = vals
    return HamiltonianMatrix(H, basis, params)


def build_sparse_hamiltonian(basis: FockBasis, params: ModelParams):
    """Same operator as a ``scipy.sparse`` CSR matrix."""
    from scipy import sparse

    rows, cols, vals = hamiltonian_entries(basis, params)
    off = rows != cols
    r = np.concatenate([rows, cols[off]])
    c = np.concatenate([cols, rows[off]])
    x = np.concatenate([vals, vals[off]])
    return sparse.csr_matrix((x, (r, c)), shape=(basis.size, basis.size))
