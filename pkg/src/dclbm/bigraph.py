"""Sparse bipartite adjacency with cached degrees."""
from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Integral, Real

import numpy as np
import scipy.sparse as sp


class DegenerateGraphError(ValueError):
    """Raised for a graph with no edges, where the density is zero."""


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Immutable m x n matrix of non-negative integer edge weights.

    Both a CSR (row sweep) and a CSC (column sweep) view are kept. Index
    arrays are stored as int64 and data as float64 so they can be handed
    to the kernels without copying.

    Attributes
    ----------
    csr : scipy.sparse.csr_matrix
        Row-major view with integer data, no explicit zeros, sorted indices.
    row_degrees, col_degrees : ndarray of int64
        ``d^r`` and ``d^c``.
    """

    csr: sp.csr_matrix
    csc: sp.csc_matrix = field(repr=False)
    row_degrees: np.ndarray = field(repr=False)
    col_degrees: np.ndarray = field(repr=False)

    @classmethod
    def from_sparse(cls, A) -> "BipartiteGraph":
        """Wrap any scipy sparse matrix or dense array of counts."""
        A = sp.csr_matrix(A)
        if A.nnz and (A.data < 0).any():
            raise ValueError("negative edge weight")
        if A.nnz and not np.array_equal(A.data, np.round(A.data)):
            raise ValueError("non-integer edge weight")
        A = A.astype(np.int64)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        csr = sp.csr_matrix(
            (A.data, A.indices.astype(np.int64), A.indptr.astype(np.int64)),
            shape=A.shape,
        )
        csc = csr.tocsc()
        csc.sort_indices()
        csc = sp.csc_matrix(
            (csc.data, csc.indices.astype(np.int64), csc.indptr.astype(np.int64)),
            shape=A.shape,
        )
        rd = np.asarray(csr.sum(axis=1)).ravel().astype(np.int64)
        cd = np.asarray(csr.sum(axis=0)).ravel().astype(np.int64)
        return cls(csr, csc, rd, cd)

    def __post_init__(self):
        # float copies of the data for the kernels
        for name, mat in (("_row_view", self.csr), ("_col_view", self.csc)):
            view = (
                np.ascontiguousarray(mat.indptr, dtype=np.int64),
                np.ascontiguousarray(mat.indices, dtype=np.int64),
                np.ascontiguousarray(mat.data, dtype=np.float64),
            )
            object.__setattr__(self, name, view)

    @property
    def m(self) -> int:
        return self.csr.shape[0]

    @property
    def n(self) -> int:
        return self.csr.shape[1]

    @property
    def shape(self):
        return self.csr.shape

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    @property
    def total_weight(self) -> int:
        return int(self.row_degrees.sum())

    @property
    def T(self) -> "BipartiteGraph":
        """Transposed graph, sharing storage."""
        return BipartiteGraph(self.csc.T, self.csr.T, self.col_degrees, self.row_degrees)

    def row_view(self):
        """``(indptr, indices, data)`` of the CSR view, data as float64."""
        return self._row_view

    def col_view(self):
        """``(indptr, indices, data)`` of the CSC view, data as float64."""
        return self._col_view

    def triples(self):
        """Yield ``(i, j, A_ij)`` for the stored entries in row-major order."""
        coo = self.csr.tocoo()
        for i, j, a in zip(coo.row, coo.col, coo.data):
            yield int(i), int(j), int(a)

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return self.shape == other.shape and (self.csr != other.csr).nnz == 0

    __hash__ = None


def build_graph(m: int, n: int, triples) -> BipartiteGraph:
    """Build a graph from ``(i, j, weight)`` triples; duplicates are summed.

    Raises
    ------
    ValueError
        On an out-of-range index or a negative / non-integer weight.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rows, cols, vals = [], [], []
    for t, (i, j, a) in enumerate(triples):
        if not (isinstance(i, Integral) and 0 <= i < m):
            raise ValueError(f"row index out of range in triple {t}: {i!r}")
        if not (isinstance(j, Integral) and 0 <= j < n):
            raise ValueError(f"column index out of range in triple {t}: {j!r}")
        if isinstance(a, bool) or not isinstance(a, Real) or a != int(a):
            raise ValueError(f"non-integer weight in triple {t}: {a!r}")
        if a < 0:
            raise ValueError(f"negative weight in triple {t}: {a!r}")
        rows.append(int(i))
        cols.append(int(j))
        vals.append(int(a))
    A = sp.coo_matrix(
        (np.asarray(vals, dtype=np.int64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(m, n),
    )
    return BipartiteGraph.from_sparse(A)


def density(g: BipartiteGraph) -> float:
    """Total edge weight divided by ``m * n``."""
    total = g.total_weight
    if total <= 0:
        raise DegenerateGraphError("degenerate graph: zero density")
    return total / (g.m * g.n)


def scaled_degree_params(g: BipartiteGraph):
    """Fixed degree estimates ``d^r / (n sqrt(D))`` and ``d^c / (m sqrt(D))``.

    Their sums multiply to the total edge weight, which is what makes the
    M-step rate estimate equal one for a single block.
    """
    root = np.sqrt(density(g))
    theta = g.row_degrees / (g.n * root)
    lam = g.col_degrees / (g.m * root)
    return theta, lam
