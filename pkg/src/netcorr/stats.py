"""
Autocorrelation statistics and their null moments.

Moran's I for continuous outcomes, the Phi statistic for categorical
outcomes, and per-category join counts.  Null moments are those of the
permutation (randomization) distribution: outcome values are reassigned to
nodes uniformly at random with the weights held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError
from .weights import WeightMatrix, WeightSummary, weight_summary

__all__ = [
    "CategoricalSample",
    "MoranMoments",
    "PhiMoments",
    "binary_equivalence_check",
    "join_counts",
    "moran_moments",
    "morans_i",
    "phi",
    "phi_mean",
    "phi_moments",
    "standardize",
]

PROPORTION_TOL = 1e-12


@dataclass(frozen=True)
class CategoricalSample:
    """Category codes for ``n`` nodes plus the category probabilities.

    Use :meth:`from_values` rather than the constructor.  ``labels`` holds
    integer codes into ``categories``; ``proportions[k]`` is the probability
    of category ``k``.  When ``supplied`` is false the proportions are the
    sample proportions.
    """

    labels: np.ndarray
    proportions: np.ndarray
    categories: tuple = field(default=())
    supplied: bool = False

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("labels must be a 1-d integer array of category codes")
        props = np.asarray(self.proportions, dtype=np.float64)
        K = props.size
        if K < 2:
            raise DegenerateDataError(f"need at least two categories, got {K}")
        if labels.size and (labels.min() < 0 or labels.max() >= K):
            raise ValueError("category code without a proportion")
        if np.any(props < 0) or abs(props.sum() - 1.0) > PROPORTION_TOL * K:
            raise ValueError("proportions must be nonnegative and sum to 1")
        if np.any(props[np.unique(labels)] <= 0):
            raise ValueError("an observed category has zero proportion")
        cats = tuple(self.categories) if self.categories else tuple(range(K))
        if len(cats) != K:
            raise ValueError("categories and proportions differ in length")
        labels = labels.astype(np.int64)
        labels.flags.writeable = False
        props.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "proportions", props)
        object.__setattr__(self, "categories", cats)

    @classmethod
    def from_values(cls, values, categories=None, proportions=None) -> "CategoricalSample":
        """Encode raw category values.

        Parameters
        ----------
        values : sequence
            One category value per node.
        categories : sequence, optional
            Declared category set, in order.  Defaults to the sorted distinct
            values.  Declared categories need not be observed.
        proportions : sequence of float, optional
            Known population proportions aligned with ``categories``.  When
            omitted, sample proportions are used.
        """
        values = np.asarray(values)
        if categories is None:
            cats, codes = np.unique(values, return_inverse=True)
        else:
            cats = np.asarray(categories)
            lookup = {c: i for i, c in enumerate(cats.tolist())}
            try:
                codes = np.array([lookup[v] for v in values.tolist()], dtype=np.int64)
            except KeyError as exc:
                raise ValueError(f"value {exc.args[0]!r} is not a declared category") from None
        codes = codes.ravel().astype(np.int64)
        if proportions is None:
            props = np.bincount(codes, minlength=len(cats)) / codes.size
            supplied = False
        else:
            props = np.asarray(proportions, dtype=np.float64)
            supplied = True
        return cls(labels=codes, proportions=props, categories=tuple(cats.tolist()), supplied=supplied)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def K(self) -> int:
        return self.proportions.size

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def present(self) -> np.ndarray:
        """Codes of the categories that occur in ``labels``."""
        return np.flatnonzero(self.counts)

    def with_labels(self, labels) -> "CategoricalSample":
        return CategoricalSample(labels, self.proportions, self.categories, self.supplied)


@dataclass(frozen=True)
class MoranMoments:
    mu: float
    variance: float
    variant: str = "randomization"

    def to_dict(self) -> dict:
        return {"mu": self.mu, "variance": self.variance, "variant": self.variant}


@dataclass(frozen=True)
class PhiMoments:
    """Permutation-null moments of Phi and the inverse-proportion sums."""

    mu: float
    second_moment: float
    variance: float
    q1: float
    q2: float
    q3: float
    q22: float

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "second_moment": self.second_moment,
            "variance": self.variance,
            "q1": self.q1,
            "q2": self.q2,
            "q3": self.q3,
            "q22": self.q22,
        }


def _check_length(n: int, W: WeightMatrix) -> None:
    if n != W.n:
        raise ValueError(f"sample has {n} values but the weight matrix is {W.n} x {W.n}")


def _continuous(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("y must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    return y


def _deviations(y: np.ndarray) -> tuple[np.ndarray, float]:
    z = y - y.mean()
    m2 = float(z @ z)
    if m2 <= 0 or np.all(y == y[0]):
        raise DegenerateDataError("Moran's I is undefined for a constant variable")
    return z, m2


def morans_i(y, W: WeightMatrix) -> float:
    """Moran's I of ``y`` under weights ``W``.

    ``I = n * sum_ij w_ij z_i z_j / (S0 * sum_i z_i^2)`` with ``z = y - mean(y)``.
    """
    y = _continuous(y)
    _check_length(y.size, W)
    z, m2 = _deviations(y)
    s0 = weight_summary(W).s0
    return float(y.size * (z @ (W @ z)) / (s0 * m2))


def _moran_batch(Z: np.ndarray, W: WeightMatrix, s0: float, m2: float) -> np.ndarray:
    # Z holds one permuted deviation vector per column
    return Z.shape[0] * np.einsum("ij,ij->j", Z, W @ Z) / (s0 * m2)


def moran_moments(W: WeightMatrix, y=None, variant: str = "randomization") -> MoranMoments:
    """Null mean and variance of Moran's I.

    Parameters
    ----------
    W : WeightMatrix
    y : array_like, optional
        Required for the ``"randomization"`` variant, which is the exact
        permutation distribution for the observed values.
    variant : {"randomization", "normality"}
        ``"normality"`` assumes i.i.d. Gaussian outcomes.
    """
    n = W.n
    if n < 3:
        raise ValueError("Moran moments need n >= 3")
    s = weight_summary(W)
    mu = -1.0 / (n - 1)
    s0, s1, s2 = s.s0, s.s1, s.s2
    if variant == "normality":
        e2 = (n * n * s1 - n * s2 + 3 * s0 * s0) / (s0 * s0 * (n * n - 1))
        return MoranMoments(mu=mu, variance=e2 - mu * mu, variant=variant)
    if variant != "randomization":
        raise ValueError(f"unknown variant {variant!r}")
    if y is None:
        raise ValueError("the randomization variant needs the observed values")
    y = _continuous(y)
    _check_length(y.size, W)
    z, m2 = _deviations(y)
    m4 = float(np.sum(z**4))
    # averages of z_u z_v z_x z_w over distinct index patterns, weighted by
    # how often each pattern occurs in the square of sum_ij w_ij z_i z_j
    pair = (m2 * m2 - m4) / (n * (n - 1))
    triple = (2 * m4 - m2 * m2) / (n * (n - 1) * (n - 2))
    quad = (3 * m2 * m2 - 6 * m4) / (n * (n - 1) * (n - 2) * (n - 3)) if n > 3 else 0.0
    e_num2 = s1 * pair + (s2 - 2 * s1) * triple + (s0 * s0 - s2 + s1) * quad
    e2 = n * n * e_num2 / (s0 * s0 * m2 * m2)
    return MoranMoments(mu=mu, variance=e2 - mu * mu, variant=variant)


def standardize(stat: float, moments) -> float:
    """``(stat - mu) / sqrt(variance)``."""
    if not moments.variance > 0:
        raise DegenerateDataError("null variance is not positive")
    return float((stat - moments.mu) / np.sqrt(moments.variance))


def _pair_table(props: np.ndarray) -> np.ndarray:
    inv = np.zeros_like(props)
    nz = props > 0
    inv[nz] = 1.0 / props[nz]
    table = -np.outer(inv, inv)
    np.fill_diagonal(table, inv**2)
    return table


def _check_categorical(s: CategoricalSample, W: WeightMatrix) -> None:
    _check_length(s.n, W)
    if s.present().size < 2:
        raise DegenerateDataError("need at least two observed categories")


def phi(s: CategoricalSample, W: WeightMatrix) -> float:
    """The Phi statistic for categorical autocorrelation.

    Each ordered pair contributes ``w_ij / (p_a p_b)`` with a plus sign when
    the two labels agree and a minus sign otherwise; the sum is divided by
    S0.
    """
    _check_categorical(s, W)
    return float(_phi_batch(s.labels[:, None], s.proportions, W, weight_summary(W).s0)[0])


def _onehot(L: np.ndarray, K: int) -> np.ndarray:
    # L is (n, m); result is (n, m*K) with column block r holding replicate r
    n, m = L.shape
    X = np.zeros((n, m, K))
    np.put_along_axis(X, L[:, :, None], 1.0, axis=2)
    return X.reshape(n, m * K)


def _category_forms(L: np.ndarray, K: int, W: WeightMatrix) -> np.ndarray:
    """``F[r, k, l] = c_k^T W c_l`` for each replicate column ``r`` of ``L``."""
    n, m = L.shape
    X = _onehot(L, K)
    G = (W @ X).reshape(n, m, K)
    return np.einsum("nrk,nrl->rkl", X.reshape(n, m, K), G)


def _phi_batch(L: np.ndarray, props: np.ndarray, W: WeightMatrix, s0: float) -> np.ndarray:
    F = _category_forms(L, props.size, W)
    return np.einsum("rkl,kl->r", F, _pair_table(props)) / s0


def _joincount_batch(L: np.ndarray, K: int, W: WeightMatrix) -> np.ndarray:
    F = _category_forms(L, K, W)
    return 0.5 * np.einsum("rkk->rk", F)


def _inverse_sums(props: np.ndarray) -> tuple[float, float, float, float]:
    inv = 1.0 / props
    q1 = float(inv.sum())
    return q1, float((inv**2).sum()), float((inv**3).sum()), float(np.outer(inv, inv).sum())


def _sample_props(s: CategoricalSample) -> np.ndarray:
    if s.supplied:
        raise ValueError("permutation moments require sample proportions, not supplied ones")
    present = s.present()
    if present.size < 2:
        raise DegenerateDataError("need at least two observed categories")
    return s.proportions[present]


def phi_mean(s: CategoricalSample) -> float:
    """Permutation-null mean of Phi; needs only ``n`` and the proportions."""
    p = _sample_props(s)
    n, k = s.n, p.size
    q1 = float((1.0 / p).sum())
    return (n * n * k * (2 - k) - n * q1) / (n * (n - 1))


def phi_moments(s: CategoricalSample, summary: WeightSummary) -> PhiMoments:
    """Closed-form permutation-null moments of Phi.

    Valid for sample proportions only; ``k`` is the number of observed
    categories and ``Q_m = sum_l p_l^-m``.

    Raises
    ------
    DegenerateDataError
        For ``n < 4`` or fewer than two observed categories.
    """
    p = _sample_props(s)
    n, k = s.n, p.size
    if n < 4:
        raise DegenerateDataError("the second moment of Phi needs n >= 4")
    if summary.n != n:
        raise ValueError("weight summary and sample disagree on n")
    q1, q2, q3, q22 = _inverse_sums(p)
    s0, s1, s2 = summary.s0, summary.s1, summary.s2

    mu = (n**2 * k * (2 - k) - n * q1) / (n * (n - 1))
    t1 = s1 / (n * (n - 1)) * (n**2 * q22 - n * q3)
    t2 = (s2 - 2 * s1) / (n * (n - 1) * (n - 2)) * (
        ((k - 4) * k + 4) * n**3 * q1 + n * (n * ((2 * k - 4) * q2 - q22) + 2 * q3)
    )
    t3 = (s0**2 - s2 + s1) / (n * (n - 1) * (n - 2) * (n - 3)) * (
        n
        * (
            -4 * q3
            + 2 * n * q22
            - 6 * k * n * q2
            + 12 * n * q2
            - 3 * k**2 * n**2 * q1
            + 14 * k * n**2 * q1
            - 16 * n**2 * q1
            + k**4 * n**3
            - 4 * k**3 * n**3
            + 4 * k**2 * n**3
        )
        - ((2 * k - 4) * n**2 * q2 + n**2 * (k * n * (2 * q1 - k * q1) - q22) + 2 * n * q3)
    )
    second = (t1 + t2 + t3) / s0**2
    return PhiMoments(mu=mu, second_moment=second, variance=second - mu * mu, q1=q1, q2=q2, q3=q3, q22=q22)


def join_counts(s: CategoricalSample, W: WeightMatrix) -> np.ndarray:
    """Weighted same-category join count for every declared category.

    ``J_k = sum_{i<j} (w_ij + w_ji)/2 * [y_i = y_j = k]``; with binary
    symmetric weights this counts each undirected join once.
    """
    _check_length(s.n, W)
    return _joincount_batch(s.labels[:, None], s.K, W)[0]


def binary_equivalence_check(y01, W: WeightMatrix) -> tuple[float, float]:
    """Standardized Moran's I and standardized Phi of a two-valued outcome.

    Both use exact permutation-null moments, under which the two are equal.
    """
    y = np.asarray(y01)
    if np.unique(y).size != 2:
        raise DegenerateDataError("binary equivalence needs exactly two distinct values")
    yc = np.unique(y, return_inverse=True)[1].ravel().astype(np.float64)
    z_i = standardize(morans_i(yc, W), moran_moments(W, yc))
    s = CategoricalSample.from_values(y)
    z_phi = standardize(phi(s, W), phi_moments(s, weight_summary(W)))
    return z_i, z_phi
