"""Ensemble k-NN estimation of f-divergences with resampling inference."""

__version__ = "0.1.0"

from .bayes import (
    ChernoffBayesBound,
    QuadraticDiscriminant,
    bayes_error_bound,
    bootstrap_bayes_bound,
    chernoff_sweep,
    load_iris,
    qda_cv_error,
)
from .divergence import SplitLayout, make_split, plug_in_estimate
from .ensemble import EnsembleConfig, EnsembleDivergence, EnsembleResult, ensemble_estimate
from .functionals import Functional, make_functional
from .inference import bootstrap_estimate, qq_diagnostic, two_sample_test
from .knn import knn_density, knn_distance, sorted_knn_distances, unit_ball_volume
from .simulate import (
    TruncatedGaussianSpec,
    clt_experiment,
    mse_sweep,
    run_trials,
    sample_truncated_gaussian,
    truth_value,
)
from .weights import basis_matrix, optimal_weights, solve_exact_weights, solve_relaxed_weights

__all__ = [
    "ChernoffBayesBound", "EnsembleConfig", "EnsembleDivergence", "EnsembleResult",
    "Functional", "QuadraticDiscriminant", "SplitLayout", "TruncatedGaussianSpec",
    "basis_matrix", "bayes_error_bound", "bootstrap_bayes_bound", "bootstrap_estimate",
    "chernoff_sweep", "clt_experiment", "ensemble_estimate", "knn_density", "knn_distance",
    "load_iris", "make_functional", "make_split", "mse_sweep", "optimal_weights",
    "plug_in_estimate", "qda_cv_error", "qq_diagnostic", "run_trials",
    "sample_truncated_gaussian", "solve_exact_weights", "solve_relaxed_weights",
    "sorted_knn_distances", "truth_value", "two_sample_test", "unit_ball_volume",
]
