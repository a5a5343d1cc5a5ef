import itertools
import math

import numpy as np
import pytest

from netcorr.weights import WeightMatrix, adjacency_from_edges


def naive_moran(y, A):
    """Moran's I by explicit double loop over a dense weight array."""
    y = np.asarray(y, dtype=float)
    n = y.size
    z = y - y.mean()
    num = sum(A[i, j] * z[i] * z[j] for i in range(n) for j in range(n))
    return n * num / (A.sum() * np.sum(z * z))


def naive_phi(labels, A, props=None):
    """Phi by explicit double loop: +w/(p_a p_b) for agreeing pairs, minus otherwise."""
    labels = list(labels)
    n = len(labels)
    if props is None:
        props = {c: labels.count(c) / n for c in set(labels)}
    total = 0.0
    for i in range(n):
        for j in range(n):
            if A[i, j] == 0:
                continue
            sign = 1.0 if labels[i] == labels[j] else -1.0
            total += sign * A[i, j] / (props[labels[i]] * props[labels[j]])
    return total / A.sum()


def exact_moments(values, statistic):
    """Mean and variance of ``statistic`` over all n! orderings of ``values``."""
    values = list(values)
    draws = [statistic(list(p)) for p in itertools.permutations(values)]
    draws = np.array(draws)
    assert len(draws) == math.factorial(len(values))
    return draws.mean(), draws.var()


def random_graph(rng, n, p=0.5):
    """Random connected-enough simple graph with at least one edge."""
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        if edges:
            return adjacency_from_edges(edges, n)


def random_weights(rng, n, density=0.6):
    """Random nonnegative, asymmetric weighted matrix with zero diagonal."""
    while True:
        A = rng.uniform(0.1, 3.0, size=(n, n)) * (rng.random((n, n)) < density)
        np.fill_diagonal(A, 0.0)
        if A.sum() > 0:
            return WeightMatrix(A)


def ring(n):
    return adjacency_from_edges([(i, (i + 1) % n) for i in range(n)], n)


def star(n):
    return adjacency_from_edges([(0, i) for i in range(1, n)], n)


@pytest.fixture
def path4():
    return adjacency_from_edges([(0, 1), (1, 2), (2, 3)], 4)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
