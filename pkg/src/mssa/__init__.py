"""Adaptive multiclass nearest-neighbor classification.

The classifier estimates class probabilities with weighted nearest-neighbor
estimates at a grid of neighbor counts and combines them per test point by
a stagewise rule gated with scaled Bernoulli Kullback-Leibler tests.
Critical values come either from a closed-form formula or from Monte-Carlo
propagation calibration on pure-noise labels.
"""

__version__ = "0.1.0"

from .aggregation import (
    AggregationTrace,
    CriticalValues,
    aggregate_point,
    bernoulli_kl,
    predict_batch,
    predict_label,
)
from .calibration import (
    CalibrationConfig,
    ScaleFactorSelection,
    calibrate,
    default_calibration_point,
    propagation_calibrate,
    select_scale_factor,
    theoretical_critical_values,
)
from .data import DatasetSchema, LabeledDataset, emit_csv, ingest_csv, read_points
from .errors import CalibrationError, CsvParseError
from .estimator import (
    ScaleEstimates,
    ScaleGrid,
    estimate_stack,
    geometric_grid,
    scale_weights,
    truncate_phi,
)
from .evaluation import (
    EvalReport,
    KnnErrorBound,
    holdout_error,
    knn_error_bound,
    knn_sweep,
    loo_error,
)
from .kernels import Kernel, KernelValidationReport, kernel_evaluate, kernel_validate
from .neighbors import NeighborIndex, NeighborList, build_index
from .synthetic import (
    Experiment,
    GaussianMixtureModel,
    bayes_label,
    bayes_risk,
    builtin_experiment,
    class_posteriors,
    sample_mixture,
)

__all__ = [
    "AggregationTrace",
    "CalibrationConfig",
    "CalibrationError",
    "CriticalValues",
    "CsvParseError",
    "DatasetSchema",
    "EvalReport",
    "Experiment",
    "GaussianMixtureModel",
    "Kernel",
    "KernelValidationReport",
    "KnnErrorBound",
    "LabeledDataset",
    "NeighborIndex",
    "NeighborList",
    "ScaleEstimates",
    "ScaleFactorSelection",
    "ScaleGrid",
    "aggregate_point",
    "bayes_label",
    "bayes_risk",
    "bernoulli_kl",
    "build_index",
    "builtin_experiment",
    "calibrate",
    "class_posteriors",
    "default_calibration_point",
    "emit_csv",
    "estimate_stack",
    "geometric_grid",
    "holdout_error",
    "ingest_csv",
    "kernel_evaluate",
    "kernel_validate",
    "knn_error_bound",
    "knn_sweep",
    "loo_error",
    "predict_batch",
    "predict_label",
    "propagation_calibrate",
    "read_points",
    "sample_mixture",
    "scale_weights",
    "select_scale_factor",
    "theoretical_critical_values",
    "truncate_phi",
]
