"""
Weight matrices for spatial and network autocorrelation tests.

A :class:`WeightMatrix` is an immutable sparse ``n x n`` matrix of
nonnegative closeness weights with an empty diagonal.  Constructors build
one from network edges, from point coordinates (k nearest neighbours,
truncated inverse distance, exponential decay) or from an explicit matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateDataError

__all__ = [
    "CoordinateSet",
    "NormalityDiagnostics",
    "WeightMatrix",
    "WeightSummary",
    "adjacency_from_edges",
    "capped_fraction",
    "exp_decay_weights",
    "inverse_distance_weights",
    "knn_weights",
    "lattice_weights",
    "normality_diagnostics",
    "row_normalize",
    "weight_summary",
]

# above this fill ratio products are taken with a dense copy
_DENSE_FILL = 0.15


class WeightMatrix:
    """Sparse nonnegative weights with zero diagonal.

    Parameters
    ----------
    matrix : array_like or scipy sparse matrix
        Square matrix of weights.  Explicit zeros are dropped.

    Raises
    ------
    ValueError
        If the matrix is not square, holds negative or non-finite entries,
        or has a nonzero diagonal.
    DegenerateDataError
        If no off-diagonal weight is positive.
    """

    def __init__(self, matrix):
        csr = sparse.csr_array(matrix, dtype=np.float64, copy=True)
        if csr.ndim != 2 or csr.shape[0] != csr.shape[1]:
            raise ValueError(f"weight matrix must be square, got shape {csr.shape}")
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        data = csr.data
        if not np.all(np.isfinite(data)):
            raise ValueError("weights must be finite")
        if np.any(data < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(csr.diagonal() != 0):
            raise ValueError("self-weights on the diagonal are not allowed")
        if csr.nnz == 0:
            raise DegenerateDataError("weight matrix has no positive off-diagonal entry (S0 = 0)")
        csr.data.flags.writeable = False
        self._csr = csr

    @classmethod
    def from_triplets(cls, rows, cols, values, n: int) -> "WeightMatrix":
        return cls(sparse.coo_array((values, (rows, cols)), shape=(n, n)))

    @property
    def n(self) -> int:
        return self._csr.shape[0]

    @property
    def csr(self) -> sparse.csr_array:
        """Read-only CSR view of the weights."""
        return self._csr

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @cached_property
    def is_symmetric(self) -> bool:
        diff = self._csr - self._csr.T
        return diff.nnz == 0 or not np.any(diff.data != 0)

    @cached_property
    def is_binary(self) -> bool:
        return bool(np.all(self._csr.data == 1.0))

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "WeightMatrix":
        return WeightMatrix(self._csr.T)

    T = property(transpose)

    def symmetrized(self) -> "WeightMatrix":
        """Return ``(W + W^T) / 2``."""
        if self.is_symmetric:
            return self
        return WeightMatrix((self._csr + self._csr.T) * 0.5)

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row indices, column indices and values in canonical row-major order."""
        coo = self._csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data

    @cached_property
    def operator(self):
        """Matrix used for products: dense when the fill is high."""
        if self.nnz > _DENSE_FILL * self.n * self.n:
            return self._csr.toarray()
        return self._csr

    def __matmul__(self, other):
        return self.operator @ other

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightMatrix) or other.n != self.n:
            return NotImplemented
        diff = self._csr - other._csr
        return diff.nnz == 0 or not np.any(diff.data != 0)

    __hash__ = None

    def __repr__(self) -> str:
        kind = "symmetric" if self.is_symmetric else "asymmetric"
        return f"WeightMatrix(n={self.n}, nnz={self.nnz}, {kind})"


@dataclass(frozen=True)
class CoordinateSet:
    """Point locations in Euclidean space, one row per point."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError("coordinates must be an (n, dim) array")
        if arr.shape[0] < 2:
            raise ValueError("need at least two points")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coordinates must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def distances(self) -> np.ndarray:
        """Dense matrix of pairwise Euclidean distances."""
        return squareform(pdist(self.coords))


def _as_coords(coords) -> CoordinateSet:
    return coords if isinstance(coords, CoordinateSet) else CoordinateSet(coords)


@dataclass(frozen=True)
class WeightSummary:
    """Scalar summaries S0, S1, S2 of a weight matrix."""

    s0: float
    s1: float
    s2: float
    n: int


@dataclass(frozen=True)
class NormalityDiagnostics:
    """Finite-sample proxies for the asymptotic normality conditions.

    Both ratios should be small for the normal approximation to be trusted.
    """

    ratio_sum: float
    ratio_max: float
    verdict: str
    threshold: float

    def to_dict(self) -> dict:
        return {
            "ratio_sum": self.ratio_sum,
            "ratio_max": self.ratio_max,
            "verdict": self.verdict,
            "threshold": self.threshold,
        }


def adjacency_from_edges(edges, n: int) -> WeightMatrix:
    """Binary symmetric adjacency matrix from undirected edges.

    Parameters
    ----------
    edges : iterable of (int, int)
        Node-id pairs, 0-based.  Duplicates and reversed duplicates collapse.
    n : int
        Number of nodes.
    """
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        raise DegenerateDataError("no edges given (S0 = 0)")
    arr = arr.reshape(-1, 2)
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError(f"node id out of range [0, {n})")
    if np.any(arr[:, 0] == arr[:, 1]):
        raise ValueError("self-loops are not allowed")
    rows = np.concatenate([arr[:, 0], arr[:, 1]])
    cols = np.concatenate([arr[:, 1], arr[:, 0]])
    csr = sparse.csr_array((np.ones(rows.size), (rows, cols)), shape=(n, n))
    csr.sum_duplicates()
    csr.data[:] = 1.0
    return WeightMatrix(csr)


def lattice_weights(nrows: int, ncols: int) -> WeightMatrix:
    """Rook-contiguity adjacency on a ``nrows x ncols`` grid."""
    idx = np.arange(nrows * ncols).reshape(nrows, ncols)
    horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    return adjacency_from_edges(np.vstack([horiz, vert]), nrows * ncols)


def _ranked_neighbors(dist_row: np.ndarray, i: int, k: int) -> np.ndarray:
    d = dist_row.copy()
    d[i] = np.inf
    # stable sort keeps lower index first among equal distances
    return np.argsort(d, kind="stable")[:k]


def knn_weights(coords, k: int) -> WeightMatrix:
    """Binary k-nearest-neighbour weights, generally asymmetric.

    ``w[i, j] = 1`` iff ``j`` is among the ``k`` points closest to ``i``.
    Distance ties are broken in favour of the lower node index.  Coincident
    points are allowed but raise a :class:`UserWarning`.
    """
    cs = _as_coords(coords)
    n = cs.n
    k = int(k)
    if k <= 0:
        raise ValueError("k must be positive")
    if k >= n:
        raise ValueError(f"k must be smaller than the number of points ({n})")
    if len(np.unique(cs.coords, axis=0)) < n:
        warnings.warn("duplicate coordinates make the neighbour ranking ambiguous", UserWarning, stacklevel=2)

    tree = cKDTree(cs.coords)
    kq = min(k + 2, n)
    dist, idx = tree.query(cs.coords, k=kq)
    neigh = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        d_i, j_i = dist[i], idx[i]
        keep = j_i != i
        d_i, j_i = d_i[keep], j_i[keep]
        # a tie straddling the k-th slot, or a truncated query, needs the full row
        if kq < n and (len(d_i) <= k or d_i[k] == d_i[k - 1] or d_i[-1] == d_i[k - 1]):
            row = np.sqrt(((cs.coords - cs.coords[i]) ** 2).sum(axis=1))
            neigh[i] = _ranked_neighbors(row, i, k)
        else:
            order = np.lexsort((j_i, d_i))[:k]
            neigh[i] = j_i[order]
    rows = np.repeat(np.arange(n), k)
    return WeightMatrix.from_triplets(rows, neigh.ravel(), np.ones(n * k), n)


def inverse_distance_weights(coords, cap: float = 10.0) -> WeightMatrix:
    """Inverse-distance weights scaled so the farthest pair gets weight 1.

    ``w[i, j] = min(D / d[i, j], cap)`` with ``D`` the largest pairwise
    distance.  The result is dense and symmetric.
    """
    cs = _as_coords(coords)
    if not cap > 1:
        raise ValueError("cap must exceed 1")
    d = cs.distances()
    off = ~np.eye(cs.n, dtype=bool)
    if np.any(d[off] == 0):
        raise ValueError("coincident points give zero distances")
    dmax = d.max()
    w = np.zeros_like(d)
    w[off] = np.minimum(dmax / d[off], cap)
    return WeightMatrix(w)


def capped_fraction(W: WeightMatrix, cap: float = 10.0) -> float:
    """Share of off-diagonal entries sitting at the cap."""
    n = W.n
    return float(np.count_nonzero(W.csr.data >= cap)) / (n * (n - 1))


def exp_decay_weights(coords, q: float) -> WeightMatrix:
    """Exponential distance-decay weights ``exp(-q d[i, j] / D)``.

    The diagonal is left empty; restore ones on it to use the matrix as a
    correlation matrix.
    """
    cs = _as_coords(coords)
    if q < 0:
        raise ValueError("q must be nonnegative")
    d = cs.distances()
    w = np.exp(-q * d / d.max())
    np.fill_diagonal(w, 0.0)
    return WeightMatrix(w)


def row_normalize(W: WeightMatrix) -> WeightMatrix:
    """Scale each row to sum to one.

    Rows already summing to one within ``1e-12`` are left untouched.
    """
    sums = np.asarray(W.csr.sum(axis=1)).ravel()
    if np.any(sums <= 0):
        raise DegenerateDataError("isolated node: a row of the weight matrix sums to zero")
    # already stochastic up to rounding: return as is so the map is idempotent
    if np.all(np.abs(sums - 1.0) <= 1e-12):
        return W
    return WeightMatrix(sparse.diags_array(1.0 / sums) @ W.csr)


def weight_summary(W: WeightMatrix) -> WeightSummary:
    """S0, S1 and S2 of ``W``; each depends only on ``W + W^T``."""
    sym = W.csr + W.csr.T
    s0 = sym.sum() / 2.0
    s1 = (sym.data**2).sum() / 2.0
    s2 = (np.asarray(sym.sum(axis=1)).ravel() ** 2).sum()
    return WeightSummary(s0=float(s0), s1=float(s1), s2=float(s2), n=W.n)


def normality_diagnostics(W: WeightMatrix, threshold: float = 0.1) -> NormalityDiagnostics:
    """Ratios behind the asymptotic normality conditions, on ``(W + W^T)/2``.

    ``ratio_sum = sum_ij d_ij^2 / sum_i d_i.^2`` and
    ``ratio_max = max_i d_i.^2 / sum_k d_k.^2``.  The verdict is ``suspect``
    when ``ratio_max`` exceeds ``threshold``.
    """
    d = W.symmetrized().csr
    rowsum_sq = np.asarray(d.sum(axis=1)).ravel() ** 2
    total = rowsum_sq.sum()
    ratio_sum = float((d.data**2).sum() / total)
    ratio_max = float(rowsum_sq.max() / total)
    verdict = "suspect" if ratio_max > threshold else "plausible"
    return NormalityDiagnostics(ratio_sum=ratio_sum, ratio_max=ratio_max, verdict=verdict, threshold=threshold)
