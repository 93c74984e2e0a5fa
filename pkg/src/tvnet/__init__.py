"""tvnet: multiple change-point detection and time-varying graph estimation
for high-dimensional nonstationary time series."""

from .changepoint import (
    ChangePointReport,
    RateInputs,
    ScanCurve,
    default_bandwidth,
    detect,
    diff_stat,
    rate_calculator,
    scan,
    select_threshold,
)
from .clime import (
    ClimeError,
    GraphEstimate,
    InfeasibleColumnError,
    PrecisionEstimate,
    StabilitySelection,
    TvClimePath,
    clime,
    clime_column,
    stability_select_lambda,
    support,
    tv_clime_path,
)
from .evaluate import (
    CpErrorSummary,
    RocPoint,
    changepoint_error,
    graph_distance_matrix,
    roc_auc,
    roc_sweep,
    run_table_experiment,
    sensitivity_specificity,
)
from .kernels import (
    KernelSpec,
    WeightVector,
    kernel_eval,
    kernel_weights,
    reflected_covariance,
    smoothed_covariance,
)
from .panel import CovarianceSnapshot, TimeSeriesPanel
from .sim import (
    IllConditionedError,
    SimDesign,
    build_sim_design,
    simulate_panel,
    standardized_t_innovations,
    true_covariance,
    true_graph,
)

__all__ = [
    "ChangePointReport", "ClimeError", "CovarianceSnapshot", "CpErrorSummary",
    "GraphEstimate", "IllConditionedError", "InfeasibleColumnError",
    "KernelSpec", "PrecisionEstimate", "RateInputs", "RocPoint", "ScanCurve",
    "SimDesign", "StabilitySelection", "TimeSeriesPanel", "TvClimePath",
    "WeightVector", "build_sim_design", "changepoint_error", "clime",
    "clime_column", "default_bandwidth", "detect", "diff_stat",
    "graph_distance_matrix", "kernel_eval", "kernel_weights", "rate_calculator",
    "reflected_covariance", "roc_auc", "roc_sweep", "run_table_experiment",
    "scan", "select_threshold", "sensitivity_specificity", "simulate_panel",
    "smoothed_covariance", "stability_select_lambda",
    "standardized_t_innovations", "support", "true_covariance", "true_graph",
    "tv_clime_path",
]
