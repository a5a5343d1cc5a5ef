"""
Generators for data with controlled spatial or network dependence.

All generators are pure functions of their arguments; randomness comes only
from the integer ``seed``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import linalg

from ._seeding import derive_seed, stream
from .errors import DegenerateDataError
from .stats import CategoricalSample
from .weights import WeightMatrix, adjacency_from_edges, row_normalize

__all__ = [
    "SAR_CUTOFFS",
    "CORRERR_CUTOFFS",
    "TRANSMISSION_MARGINALS",
    "SimDataset",
    "categorize_by_quantiles",
    "covariance_factor",
    "draw_labels",
    "gen_correlated_error",
    "gen_network",
    "gen_neighbor_matrix",
    "gen_sar",
    "transmit_categorical",
    "transmit_continuous",
    "uniform_coordinates",
]

SAR_CUTOFFS = (0.25, 0.5, 0.75)
CORRERR_CUTOFFS = (0.1, 0.3, 0.6, 0.85)
TRANSMISSION_MARGINALS = (0.1, 0.2, 0.3, 0.25, 0.15)
PSD_RTOL = 1e-10


@dataclass
class SimDataset:
    """A generated outcome together with the structure that produced it."""

    W: WeightMatrix | None
    y: object
    truth: dict = field(default_factory=dict)
    seed: int | None = None
    coords: np.ndarray | None = None


def gen_neighbor_matrix(n: int, d: int, seed: int, max_redraws: int = 20) -> WeightMatrix:
    """Random simple graph whose degrees follow ``1 + Binomial(2(d-1), 1/2)``.

    Target degrees are drawn independently, an odd degree sum is repaired by
    bumping one random node, the sequence is realised by Havel-Hakimi and the
    result is randomised with degree-preserving double edge swaps.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if n <= 2 * (d - 1) + 1:
        raise ValueError("n must exceed the largest possible degree 2(d-1)+1")
    for attempt in range(max_redraws):
        rng = stream(seed, attempt)
        deg = 1 + rng.binomial(2 * (d - 1), 0.5, size=n)
        if deg.sum() % 2:
            candidates = np.flatnonzero(deg < n - 1)
            deg[rng.choice(candidates)] += 1
        if nx.is_graphical(deg.tolist()):
            break
    else:
        raise ValueError(f"no graphical degree sequence after {max_redraws} draws")
    G = nx.havel_hakimi_graph(deg.tolist())
    n_edges = G.number_of_edges()
    if n_edges >= 2 and n >= 4:
        try:
            nx.double_edge_swap(G, nswap=n_edges, max_tries=100 * n_edges, seed=int(rng.integers(2**31)))
        except nx.NetworkXAlgorithmError:
            pass  # few admissible swaps, e.g. a perfect matching on four nodes
    return adjacency_from_edges(np.array(sorted(G.edges()), dtype=np.int64), n)


def gen_sar(W: WeightMatrix, rho: float, seed: int) -> np.ndarray:
    """Draw ``y`` solving ``(I - rho * W_rn) y = eps`` with ``eps ~ N(0, I)``.

    ``W_rn`` is ``W`` with rows scaled to sum to one, so ``|rho| < 1``
    keeps the system nonsingular.
    """
    if not abs(rho) < 1:
        raise ValueError("rho must lie in (-1, 1)")
    eps = stream(seed).standard_normal(W.n)
    if rho == 0:
        return eps
    A = np.eye(W.n) - rho * row_normalize(W).toarray()
    try:
        return linalg.solve(A, eps)
    except linalg.LinAlgError as exc:
        raise DegenerateDataError(f"I - rho W is singular for rho={rho}") from exc


def covariance_factor(Pi) -> np.ndarray:
    """Matrix ``L`` with ``L @ L.T == Pi``, built from a clipped eigendecomposition.

    ``Pi`` may be a :class:`WeightMatrix` (its empty diagonal is replaced by
    ones) or a dense symmetric array.  Eigenvalues below ``1e-10`` times the
    largest are set to zero.
    """
    if isinstance(Pi, WeightMatrix):
        S = Pi.toarray()
        np.fill_diagonal(S, 1.0)
    else:
        S = np.array(Pi, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    off = S - np.diag(np.diag(S))
    if not np.any(off) and np.all(np.diag(S) == 1.0):
        return np.eye(S.shape[0])
    vals, vecs = linalg.eigh(S)
    if vals[-1] <= 0:
        raise linalg.LinAlgError("covariance has no positive eigenvalue")
    vals = np.where(vals < PSD_RTOL * vals[-1], 0.0, vals)
    return vecs * np.sqrt(vals)


def gen_correlated_error(Pi, seed: int, factor: np.ndarray | None = None) -> np.ndarray:
    """Draw ``y = B^T xi`` with ``B^T B = Pi`` and ``xi ~ N(0, I)``.

    Pass a precomputed ``factor`` from :func:`covariance_factor` to reuse it
    across draws.  When ``Pi`` is the identity the raw noise is returned.
    """
    L = covariance_factor(Pi) if factor is None else factor
    xi = stream(seed).standard_normal(L.shape[0])
    if L.shape[0] == L.shape[1] and np.array_equal(L, np.eye(L.shape[0])):
        return xi
    return L @ xi


def uniform_coordinates(n: int, seed: int, width: float = 5.0, height: float = 1.0) -> np.ndarray:
    """``n`` points drawn uniformly on a ``width x height`` rectangle."""
    rng = stream(seed)
    return np.column_stack([rng.uniform(0, width, n), rng.uniform(0, height, n)])


def categorize_by_quantiles(y, cutoffs=SAR_CUTOFFS) -> CategoricalSample:
    """Cut a continuous sample at its own empirical quantiles.

    The category of ``y_i`` is the number of thresholds not exceeding it.
    If ties collapse thresholds, only the realised categories are kept and a
    :class:`UserWarning` is issued.
    """
    y = np.asarray(y, dtype=np.float64)
    cuts = np.asarray(cutoffs, dtype=np.float64)
    if cuts.ndim != 1 or cuts.size == 0 or np.any(cuts <= 0) or np.any(cuts >= 1) or np.any(np.diff(cuts) <= 0):
        raise ValueError("cutoffs must be strictly increasing inside (0, 1)")
    K = cuts.size + 1
    if y.size < K:
        raise ValueError(f"need at least {K} values for {K} categories")
    thresholds = np.quantile(y, cuts)
    codes = np.searchsorted(thresholds, y, side="right")
    realised = np.unique(codes).size
    if realised < K:
        warnings.warn(f"tied values leave only {realised} of {K} categories", UserWarning, stacklevel=2)
    return CategoricalSample.from_values(codes)


def gen_network(n: int, graph_model: str = "watts_strogatz", seed: int = 0, *, k: int = 4, beta: float = 0.1,
                p: float | None = None, max_tries: int = 100) -> WeightMatrix:
    """Connected random graph as a binary adjacency matrix.

    Parameters
    ----------
    graph_model : {"watts_strogatz", "erdos_renyi"}
        Watts-Strogatz uses ring degree ``k`` and rewiring probability
        ``beta``; Erdos-Renyi uses edge probability ``p``.
    max_tries : int
        Graphs are redrawn until connected, at most this many times.
    """
    if graph_model == "watts_strogatz":
        if not (0 < k < n and k % 2 == 0) or not 0 <= beta <= 1:
            raise ValueError("Watts-Strogatz needs an even 0 < k < n and 0 <= beta <= 1")
        make = lambda s: nx.watts_strogatz_graph(n, k, beta, seed=s)  # noqa: E731
    elif graph_model == "erdos_renyi":
        if p is None or not 0 < p <= 1:
            raise ValueError("Erdos-Renyi needs an edge probability 0 < p <= 1")
        make = lambda s: nx.gnp_random_graph(n, p, seed=s)  # noqa: E731
    else:
        raise ValueError(f"unknown graph model {graph_model!r}")
    for attempt in range(max_tries):
        G = make(derive_seed(seed, attempt) % 2**32)
        if G.number_of_edges() and nx.is_connected(G):
            return adjacency_from_edges(np.array(sorted(G.edges()), dtype=np.int64), n)
    raise DegenerateDataError(f"no connected {graph_model} graph in {max_tries} tries")


def _isolated(A: WeightMatrix) -> bool:
    return bool(np.any(np.diff(A.csr.indptr) == 0))


def transmit_continuous(y0, A: WeightMatrix, t: int, alpha: float) -> np.ndarray:
    """Synchronous neighbour averaging.

    Each step sets ``y_i <- (1 - alpha) y_i + alpha * mean_{j ~ i} y_j``.
    """
    y = np.array(y0, dtype=np.float64)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if t == 0:
        return y
    if _isolated(A):
        raise DegenerateDataError("an isolated node has no neighbours to average")
    P = row_normalize(A)
    for _ in range(t):
        y = (1 - alpha) * y + alpha * (P @ y)
    return y


def transmit_categorical(labels0, A: WeightMatrix, t: int, p_adopt: float, seed: int) -> np.ndarray:
    """Synchronous random-neighbour copying.

    At each step every node, independently with probability ``p_adopt``,
    takes the previous-step label of one uniformly chosen neighbour.
    Returns the label array; wrap it with ``CategoricalSample`` as needed.
    """
    labels = np.array(labels0, copy=True)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not 0 <= p_adopt <= 1:
        raise ValueError("p_adopt must lie in [0, 1]")
    if t == 0 or p_adopt == 0:
        return labels
    if _isolated(A):
        raise DegenerateDataError("an isolated node has no neighbour to copy")
    indptr, indices = A.csr.indptr, A.csr.indices
    deg = np.diff(indptr)
    n = labels.size
    rng = stream(seed)
    for _ in range(t):
        adopt = rng.random(n) < p_adopt
        pick = indices[indptr[:-1] + (rng.random(n) * deg).astype(np.int64)]
        labels = np.where(adopt, labels[pick], labels)
    return labels


def draw_labels(n: int, marginals, seed: int) -> np.ndarray:
    """I.i.d. category codes ``0..K-1`` with the given probabilities."""
    p = np.asarray(marginals, dtype=np.float64)
    if np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
        raise ValueError("marginals must be positive and sum to 1")
    return stream(seed).choice(p.size, size=n, p=p)
