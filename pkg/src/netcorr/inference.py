"""
Permutation and normal-approximation tests for Moran's I, Phi and join counts.

Replicate ``r`` of a permutation null always uses the random stream keyed by
``(seed, r)`` and replicates are evaluated in fixed-size blocks, so the null
draws are identical whatever the number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import stats
from ._seeding import stream
from .errors import DegenerateDataError
from .stats import CategoricalSample
from .weights import WeightMatrix, normality_diagnostics, weight_summary

__all__ = [
    "PermutationPlan",
    "TestResult",
    "p_value_normal",
    "p_value_permutation",
    "permutation_null",
    "permutation_indices",
    "run_joincount_tests",
    "run_moran_test",
    "run_phi_test",
]

TAILS = ("upper", "lower", "two_sided")
BLOCK = 128
# relative slack when comparing permuted statistics with the observed one
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class PermutationPlan:
    """Number of permutation replicates, base seed, and tail of the test."""

    m: int = 500
    seed: int = 0
    tail: str = "upper"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one permutation replicate")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.tail not in TAILS:
            raise ValueError(f"tail must be one of {TAILS}")


@dataclass
class TestResult:
    """Outcome of one autocorrelation test."""

    __test__ = False  # not a pytest class

    statistic_name: str
    statistic: float
    n: int
    s0: float
    tail: str
    z: float | None = None
    p_permutation: float | None = None
    p_normal: float | None = None
    moments: dict | None = None
    m_used: int = 0
    seed: int | None = None
    diagnostics: dict | None = None
    category: object = None
    n_category: int | None = None
    skipped: bool = False
    null_draws: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "statistic_name": self.statistic_name,
            "statistic": self.statistic,
            "z": self.z,
            "p_permutation": self.p_permutation,
            "p_normal": self.p_normal,
            "moments": self.moments,
            "n": self.n,
            "s0": self.s0,
            "m_used": self.m_used,
            "seed": self.seed,
            "tail": self.tail,
            "diagnostics": self.diagnostics,
        }
        if self.statistic_name == "joincount":
            out["category"] = _jsonable(self.category)
            out["n_category"] = self.n_category
            out["skipped"] = self.skipped
        return out


def _jsonable(value):
    return value.item() if isinstance(value, np.generic) else value


def permutation_indices(seed: int, start: int, stop: int, n: int) -> np.ndarray:
    """Permutations ``start..stop-1`` of ``range(n)`` as an ``(n, stop-start)`` array."""
    return np.column_stack([stream(seed, r).permutation(n) for r in range(start, stop)])


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        return os.cpu_count() or 1
    return max(1, int(threads))


def _blockwise(fn, m: int, threads: int | None) -> np.ndarray:
    blocks = [(a, min(a + BLOCK, m)) for a in range(0, m, BLOCK)]
    workers = min(_resolve_threads(threads), len(blocks))
    if workers <= 1:
        parts = [fn(a, b) for a, b in blocks]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), blocks))
    return np.concatenate(parts)


def permutation_null(stat_kind: str, data, W: WeightMatrix, plan: PermutationPlan, threads: int | None = 1) -> np.ndarray:
    """Statistic values under ``plan.m`` random relabellings of the nodes.

    Parameters
    ----------
    stat_kind : {"moran", "phi", "joincount"}
    data : array_like or CategoricalSample
        Continuous values for ``"moran"``, a :class:`CategoricalSample`
        otherwise.
    W : WeightMatrix
    plan : PermutationPlan
    threads : int, optional
        Worker threads; ``None`` uses every core.  Does not affect the output.

    Returns
    -------
    numpy.ndarray
        Shape ``(m,)``, or ``(m, K)`` for join counts.
    """
    s0 = weight_summary(W).s0
    n = W.n
    if stat_kind == "moran":
        y = stats._continuous(data)
        stats._check_length(y.size, W)
        z, m2 = stats._deviations(y)

        def block(a, b):
            return stats._moran_batch(z[permutation_indices(plan.seed, a, b, n)], W, s0, m2)

    elif stat_kind == "phi":
        stats._check_categorical(data, W)

        def block(a, b):
            return stats._phi_batch(data.labels[permutation_indices(plan.seed, a, b, n)], data.proportions, W, s0)

    elif stat_kind == "joincount":
        stats._check_length(data.n, W)

        def block(a, b):
            return stats._joincount_batch(data.labels[permutation_indices(plan.seed, a, b, n)], data.K, W)

    else:
        raise ValueError(f"unknown statistic {stat_kind!r}")
    return _blockwise(block, plan.m, threads)


def p_value_permutation(observed: float, null_draws, tail: str = "upper") -> float:
    """Monte Carlo p-value ``(1 + #{draws at least as extreme}) / (M + 1)``.

    Two-sided p-values double the smaller one-sided value, capped at 1.
    """
    draws = np.asarray(null_draws, dtype=np.float64)
    if draws.size == 0:
        raise ValueError("no null draws")
    m = draws.size
    slack = TIE_RTOL * max(1.0, abs(observed))
    upper = (1 + np.count_nonzero(draws >= observed - slack)) / (m + 1)
    lower = (1 + np.count_nonzero(draws <= observed + slack)) / (m + 1)
    if tail == "upper":
        return float(upper)
    if tail == "lower":
        return float(lower)
    if tail == "two_sided":
        return float(min(1.0, 2 * min(upper, lower)))
    raise ValueError(f"tail must be one of {TAILS}")


def p_value_normal(z: float, tail: str = "upper") -> float:
    """Standard-normal p-value of ``z``."""
    if tail == "upper":
        return float(norm.sf(z))
    if tail == "lower":
        return float(norm.cdf(z))
    if tail == "two_sided":
        return float(2 * norm.sf(abs(z)))
    raise ValueError(f"tail must be one of {TAILS}")


def _diagnostics(W: WeightMatrix, threshold: float) -> dict:
    return normality_diagnostics(W, threshold).to_dict()


def run_moran_test(
    y,
    W: WeightMatrix,
    plan: PermutationPlan | None = PermutationPlan(),
    *,
    variant: str = "randomization",
    normal: bool = True,
    diagnostic_threshold: float = 0.1,
    threads: int | None = 1,
    keep_draws: bool = False,
) -> TestResult:
    """Moran's I test of independence.

    Set ``plan=None`` to skip the permutation test and ``normal=False`` to
    skip the normal approximation.
    """
    tail = plan.tail if plan is not None else "upper"
    y = stats._continuous(y)
    stat = stats.morans_i(y, W)
    result = TestResult("moran", stat, n=W.n, s0=weight_summary(W).s0, tail=tail)
    if normal:
        moments = stats.moran_moments(W, y, variant=variant)
        result.moments = moments.to_dict()
        result.z = stats.standardize(stat, moments)
        result.p_normal = p_value_normal(result.z, tail)
    if plan is not None:
        draws = permutation_null("moran", y, W, plan, threads)
        result.p_permutation = p_value_permutation(stat, draws, tail)
        result.m_used, result.seed = plan.m, plan.seed
        if keep_draws:
            result.null_draws = draws
    if result.p_normal is None and result.p_permutation is None:
        raise ValueError("nothing to compute: no permutation plan and normal=False")
    result.diagnostics = _diagnostics(W, diagnostic_threshold)
    return result


def run_phi_test(
    s: CategoricalSample,
    W: WeightMatrix,
    plan: PermutationPlan | None = PermutationPlan(),
    *,
    normal: bool = True,
    diagnostic_threshold: float = 0.1,
    threads: int | None = 1,
    keep_draws: bool = False,
) -> TestResult:
    """Phi test of independence for a categorical outcome.

    The normal approximation needs sample proportions and ``n >= 4``; it is
    silently dropped otherwise, leaving the permutation test.
    """
    tail = plan.tail if plan is not None else "upper"
    stat = stats.phi(s, W)
    summary = weight_summary(W)
    result = TestResult("phi", stat, n=W.n, s0=summary.s0, tail=tail)
    if normal and not s.supplied and s.n >= 4:
        moments = stats.phi_moments(s, summary)
        result.moments = moments.to_dict()
        result.z = stats.standardize(stat, moments)
        result.p_normal = p_value_normal(result.z, tail)
    if plan is not None:
        draws = permutation_null("phi", s, W, plan, threads)
        result.p_permutation = p_value_permutation(stat, draws, tail)
        result.m_used, result.seed = plan.m, plan.seed
        if keep_draws:
            result.null_draws = draws
    if result.p_normal is None and result.p_permutation is None:
        raise ValueError("no test available: give a permutation plan")
    result.diagnostics = _diagnostics(W, diagnostic_threshold)
    return result


def run_joincount_tests(
    s: CategoricalSample,
    W: WeightMatrix,
    plan: PermutationPlan = PermutationPlan(),
    *,
    diagnostic_threshold: float = 0.1,
    threads: int | None = 1,
) -> list[TestResult]:
    """One permutation test per declared category on its join count.

    Categories absent from the sample come back with ``skipped=True`` and no
    p-value.  No multiplicity correction is applied.
    """
    if s.present().size < 2:
        raise DegenerateDataError("need at least two observed categories")
    observed = stats.join_counts(s, W)
    draws = permutation_null("joincount", s, W, plan, threads)
    counts = s.counts
    s0 = weight_summary(W).s0
    diag = _diagnostics(W, diagnostic_threshold)
    results = []
    for k in range(s.K):
        res = TestResult(
            "joincount",
            float(observed[k]),
            n=W.n,
            s0=s0,
            tail=plan.tail,
            category=s.categories[k],
            n_category=int(counts[k]),
            seed=plan.seed,
            diagnostics=diag,
        )
        if counts[k] == 0:
            res.skipped = True
        else:
            res.p_permutation = p_value_permutation(observed[k], draws[:, k], plan.tail)
            res.m_used = plan.m
        results.append(res)
    return results
