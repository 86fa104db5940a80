"""Scikit-learn style wrappers around the functional core.

These estimators hold the training sample (fitting is lazy, as for any
nearest-neighbor method) and evaluate per query row at predict time, so
they compose with pipelines, ``clone``, and grid search.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import dnn_estimate, knn_estimate
from .data import Dataset, split_by_treatment
from .inference import EstimateReport, EstimatorConfig, bootstrap_report, hte_estimate
from .screening import screen_features
from .twoscale import two_scale_estimate, tune_scale


def _fit_dataset(X, y, treatment=None) -> Dataset:
    X = check_array(X, dtype=np.float64)
    y = check_array(y, dtype=np.float64, ensure_2d=False)
    return Dataset(features=X, response=y, treatment=treatment)


class DNNRegressor(RegressorMixin, BaseEstimator):
    """Subsample-averaged 1-nearest-neighbor regression at a fixed scale.

    Parameters
    ----------
    s : int
        Subsampling scale; ``s=1`` is the sample mean, ``s=n`` the plain
        1-nearest neighbor.
    """

    def __init__(self, s: int = 2):
        self.s = s

    def fit(self, X, y):
        self.data_ = _fit_dataset(X, y)
        self.n_features_in_ = self.data_.d
        return self

    def predict(self, X):
        check_is_fitted(self, "data_")
        X = check_array(X, dtype=np.float64)
        return np.array([dnn_estimate(self.data_, row, self.s) for row in X])


class KNNRegressor(RegressorMixin, BaseEstimator):
    """Classical k-nearest-neighbor regression (uniform weights)."""

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        self.data_ = _fit_dataset(X, y)
        self.n_features_in_ = self.data_.d
        return self

    def predict(self, X):
        check_is_fitted(self, "data_")
        X = check_array(X, dtype=np.float64)
        return np.array([knn_estimate(self.data_, row, self.k) for row in X])


class TwoScaleDNNRegressor(RegressorMixin, BaseEstimator):
    """Two-scale debiased DNN regression.

    With ``s=None`` the subsampling scale is tuned per query point by the
    change-of-curvature rule; otherwise the pair ``(s, 2s)`` is fixed.
    """

    def __init__(self, s: int | None = None, weight_dim: int | None = None,
                 s_max: int | None = None):
        self.s = s
        self.weight_dim = weight_dim
        self.s_max = s_max

    def fit(self, X, y):
        self.data_ = _fit_dataset(X, y)
        self.n_features_in_ = self.data_.d
        return self

    def _predict_one(self, row) -> float:
        if self.s is not None:
            return two_scale_estimate(self.data_, row, self.s, self.weight_dim)
        trace = tune_scale(self.data_, row, weight_dim=self.weight_dim,
                           s_max=self.s_max)
        return two_scale_estimate(self.data_, row, trace.chosen_s, self.weight_dim)

    def predict(self, X):
        check_is_fitted(self, "data_")
        X = check_array(X, dtype=np.float64)
        return np.array([self._predict_one(row) for row in X])


class TwoScaleHTEEstimator(BaseEstimator):
    """Heterogeneous treatment effects by stratum-wise two-scale regression.

    ``predict`` returns the effect estimate per query row;
    :meth:`report` adds a stratified-bootstrap variance and confidence
    interval at a single point.
    """

    def __init__(self, s: int | None = None, weight_dim: int | None = None,
                 s_max: int | None = None):
        self.s = s
        self.weight_dim = weight_dim
        self.s_max = s_max

    def _config(self) -> EstimatorConfig:
        return EstimatorConfig(weight_dim=self.weight_dim, s=self.s, s_max=self.s_max)

    def fit(self, X, y, treatment):
        treatment = np.asarray(treatment)
        data = _fit_dataset(X, y, treatment=treatment)
        self.view_ = split_by_treatment(data)
        self.n_features_in_ = data.d
        return self

    def predict(self, X):
        check_is_fitted(self, "view_")
        X = check_array(X, dtype=np.float64)
        config = self._config()
        return np.array([hte_estimate(self.view_, row, config) for row in X])

    def report(self, x, boot_reps: int = 1000, level: float = 0.95,
               seed: int = 0, interval: str = "percentile") -> EstimateReport:
        check_is_fitted(self, "view_")
        return bootstrap_report(self.view_, x, boot_reps=boot_reps, level=level,
                                seed=seed, config=self._config(), interval=interval)


class DistanceCorrelationScreener(SelectorMixin, BaseEstimator):
    """Feature selector ranking features by distance correlation with y.

    Exactly one of ``top_k`` and ``threshold`` must be set.
    """

    def __init__(self, top_k: int | None = None, threshold: float | None = None):
        self.top_k = top_k
        self.threshold = threshold

    def fit(self, X, y):
        data = _fit_dataset(X, y)
        result = screen_features(data, top_k=self.top_k, threshold=self.threshold)
        self.dcor_ = result.dcor
        self.kept_ = result.kept
        self.rule_ = result.rule
        self.n_features_in_ = data.d
        self.support_ = np.zeros(data.d, dtype=bool)
        self.support_[list(result.kept)] = True
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_
