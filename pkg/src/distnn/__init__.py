"""Distributional nearest neighbors (DNN) regression and inference.

The DNN estimator averages the 1-nearest-neighbor response over all
size-s subsamples of the data, which collapses to an L-statistic with
binomial weights over distance-ordered responses.  Combining two scales
cancels the leading finite-sample bias; the two-scale estimator drives
regression, heterogeneous-treatment-effect estimation, and stratified
bootstrap inference.  A simulation lab reproduces benchmark bias/variance
trade-off studies, and distance-correlation screening handles noisy
feature sets.
"""

from .core import (
    WeightVector,
    dnn_estimate,
    dnn_ustat_oracle,
    dnn_weight_matrix,
    dnn_weights,
    knn_estimate,
)
from .data import Dataset, StratifiedView, load_csv, split_by_treatment, write_csv
from .errors import DataError, GuardError, UsageError
from .inference import (
    EstimateReport,
    EstimatorConfig,
    bootstrap_report,
    hte_estimate,
    regression_report,
)
from .neighbors import NeighborOrder, order_by_distance
from .screening import ScreenResult, distance_correlation, screen_features
from .theory import AnalyticDgp, bias_coefficient, leading_bias, unit_ball_volume
from .twoscale import (
    TuneTrace,
    TwoScalePlan,
    default_weight_dim,
    tune_scale,
    two_scale_estimate,
    two_scale_weight_vector,
    two_scale_weights,
)

__version__ = "0.1.0"

# The scikit-learn wrappers import lazily so the CLI does not pay the
# sklearn import cost.
_ESTIMATOR_EXPORTS = (
    "DNNRegressor",
    "KNNRegressor",
    "TwoScaleDNNRegressor",
    "TwoScaleHTEEstimator",
    "DistanceCorrelationScreener",
)


def __getattr__(name):
    if name in _ESTIMATOR_EXPORTS:
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "AnalyticDgp",
    "DataError",
    "Dataset",
    "DistanceCorrelationScreener",
    "DNNRegressor",
    "EstimateReport",
    "EstimatorConfig",
    "GuardError",
    "KNNRegressor",
    "NeighborOrder",
    "ScreenResult",
    "StratifiedView",
    "TuneTrace",
    "TwoScaleDNNRegressor",
    "TwoScaleHTEEstimator",
    "TwoScalePlan",
    "UsageError",
    "WeightVector",
    "bias_coefficient",
    "bootstrap_report",
    "default_weight_dim",
    "distance_correlation",
    "dnn_estimate",
    "dnn_ustat_oracle",
    "dnn_weight_matrix",
    "dnn_weights",
    "hte_estimate",
    "knn_estimate",
    "leading_bias",
    "load_csv",
    "order_by_distance",
    "regression_report",
    "screen_features",
    "split_by_treatment",
    "tune_scale",
    "two_scale_estimate",
    "two_scale_weight_vector",
    "two_scale_weights",
    "unit_ball_volume",
    "write_csv",
]
