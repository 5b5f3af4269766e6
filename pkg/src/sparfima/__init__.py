"""Spatial autoregressive fractionally integrated moving average models.

Weight-matrix construction, fractional spatial operators, exact
simulation, quasi-maximum-likelihood estimation, spatial-autocorrelation
diagnostics, and a Monte Carlo harness for estimator evaluation.
"""

__version__ = "0.1.0"

from .diagnostics import (MoranResult, morans_i, morans_test, permutation_p,
                          residual_diagnostics, spatial_acf)
from .errors import (ConvergenceError, DegenerateInputError, DomainError,
                     NumericalError, ParseError, SparfimaError,
                     UnsupportedLayoutError, UnsupportedMatrixError)
from .estimation import (FitConfig, FitResult, Parameters, StdErrorReport,
                         concentrated_log_likelihood, fit_qml,
                         information_criteria, log_likelihood, residual_map,
                         std_errors)
from .fracop import (ConditionReport, FractionalOperator, apply_inverse_frac,
                     condition_report, frac_power_series, frac_power_spectral,
                     gen_binomial, log_det_frac)
from .model import (ComposedOperator, LatticeField, ModelSpec,
                    covariance_matrix, higher_order_operator,
                    influence_profile, mean_vector, polynomial_operator,
                    save_field, simulate, simulate_many)
from .montecarlo import McConfig, McReport, run_mc
from .weights import (SiteSet, WeightMatrix, eigenvalues, from_triplet_csv,
                      inverse_distance, knn, lag_order_matrix,
                      queen_contiguity, rook_contiguity, row_standardize,
                      time_shift_matrix, to_triplet_csv)

__all__ = [
    "ComposedOperator", "ConditionReport", "ConvergenceError",
    "DegenerateInputError", "DomainError", "FitConfig", "FitResult",
    "FractionalOperator", "LatticeField", "McConfig", "McReport",
    "ModelSpec", "MoranResult", "NumericalError", "Parameters", "ParseError",
    "SiteSet", "SparfimaError", "StdErrorReport", "UnsupportedLayoutError",
    "UnsupportedMatrixError", "WeightMatrix", "apply_inverse_frac",
    "concentrated_log_likelihood", "condition_report", "covariance_matrix",
    "eigenvalues", "fit_qml", "frac_power_series", "frac_power_spectral",
    "from_triplet_csv", "gen_binomial", "higher_order_operator",
    "influence_profile", "information_criteria", "inverse_distance", "knn",
    "lag_order_matrix", "log_det_frac", "log_likelihood", "mean_vector",
    "morans_i", "morans_test", "permutation_p", "polynomial_operator",
    "queen_contiguity", "residual_diagnostics", "residual_map",
    "rook_contiguity", "row_standardize", "run_mc", "save_field",
    "simulate", "simulate_many", "spatial_acf", "std_errors",
    "time_shift_matrix", "to_triplet_csv",
]
