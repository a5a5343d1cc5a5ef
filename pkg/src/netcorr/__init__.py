"""Moran's I and Phi tests for autocorrelation on networks and in space."""

__version__ = "0.1.0"

from .errors import DegenerateDataError
from .inference import (
    PermutationPlan,
    TestResult,
    permutation_null,
    run_joincount_tests,
    run_moran_test,
    run_phi_test,
)
from .stats import CategoricalSample, join_counts, moran_moments, morans_i, phi, phi_moments
from .weights import (
    WeightMatrix,
    adjacency_from_edges,
    exp_decay_weights,
    inverse_distance_weights,
    knn_weights,
    lattice_weights,
    normality_diagnostics,
    weight_summary,
)

__all__ = [
    "CategoricalSample",
    "DegenerateDataError",
    "PermutationPlan",
    "TestResult",
    "WeightMatrix",
    "adjacency_from_edges",
    "exp_decay_weights",
    "inverse_distance_weights",
    "join_counts",
    "knn_weights",
    "lattice_weights",
    "moran_moments",
    "morans_i",
    "normality_diagnostics",
    "permutation_null",
    "phi",
    "phi_moments",
    "run_joincount_tests",
    "run_moran_test",
    "run_phi_test",
    "weight_summary",
]
