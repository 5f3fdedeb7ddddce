"""Robust model-based discriminant analysis and variable selection."""

from ._core import (
    EstimationError,
    ValidationError,
    __version__,
    chi_square_quantile,
    contaminate,
    fit_ml_subset,
    fit_redda,
    gaussian_logpdf,
    generate_clean,
    greedy_select,
    load_dataset,
    misclassification_error,
    outlier_score,
    predict_map,
    selection_precision,
)

__all__ = [
    "EstimationError",
    "ValidationError",
    "__version__",
    "chi_square_quantile",
    "contaminate",
    "fit_ml_subset",
    "fit_redda",
    "gaussian_logpdf",
    "generate_clean",
    "greedy_select",
    "load_dataset",
    "misclassification_error",
    "outlier_score",
    "predict_map",
    "selection_precision",
]
