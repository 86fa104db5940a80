"""Distributional nearest neighbor (DNN) estimation kernels.

The DNN estimate with subsampling scale ``s`` averages the 1-nearest
neighbor response over all ``C(n, s)`` size-``s`` subsamples.  Its closed
form is an L-statistic: the responses sorted by distance to the query get
the fixed weights ``w_i = C(n-i, s-1) / C(n, s)``, which depend only on
``(n, s)`` and not on the realized sample.  ``dnn_ustat_oracle`` keeps the
subsample-enumeration definition alive as an independent cross-check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_scale
from .data import Dataset
from .errors import GuardError
from .neighbors import order_by_distance

# Below this size the weights come from exact integer binomial ratios
# (int/int division is correctly rounded); above it, the multiplicative
# recurrence keeps the cost O(n) without huge integers.
_EXACT_N_LIMIT = 64

# Refuse subsample enumeration beyond this many combinations.
_ORACLE_MAX_COMBINATIONS = 10**6


@dataclass(frozen=True)
class WeightVector:
    """Ordered-response weights of the DNN L-statistic.

    ``w`` has length ``n``, sums to one, is nonincreasing, and vanishes
    beyond position ``n - s + 1``.
    """

    w: np.ndarray
    s: int
    n: int


def _exact_weights(n: int, s: int) -> np.ndarray:
    total = math.comb(n, s)
    w = np.zeros(n)
    w[: n - s + 1] = [math.comb(n - i, s - 1) / total for i in range(1, n - s + 2)]
    return w


def _recurrence_weights(n: int, s: int) -> np.ndarray:
    # w_1 = s/n, w_{i+1} = w_i * (n - i - s + 1) / (n - i); zero afterwards.
    w = np.zeros(n)
    w[0] = s / n
    m = n - s + 1
    if m > 1:
        i = np.arange(1, m)
        w[1:m] = w[0] * np.cumprod((n - i - s + 1) / (n - i))
    return w


def dnn_weights(n: int, s: int) -> WeightVector:
    """Weight vector applied to distance-ordered responses.

    ``s=1`` gives the plain sample average, ``s=n`` the conventional
    1-nearest neighbor.

    Raises
    ------
    UsageError
        If ``s`` is outside ``1..n``.
    """
    s = check_scale(s, n)
    if n <= _EXACT_N_LIMIT:
        w = _exact_weights(n, s)
    else:
        w = _recurrence_weights(n, s)
    return WeightVector(w=w, s=s, n=n)


def dnn_weight_matrix(n: int, scales) -> np.ndarray:
    """Stack of weight vectors, one row per scale in ``scales``."""
    return np.vstack([dnn_weights(n, int(s)).w for s in scales])


def dnn_estimate(data: Dataset, x, s: int) -> float:
    """DNN regression estimate at ``x`` with subsampling scale ``s``."""
    order = order_by_distance(data, x)
    weights = dnn_weights(data.n, s)
    return float(weights.w @ data.response[order.perm])


def dnn_ustat_oracle(data: Dataset, x, s: int) -> float:
    """Direct subsample-enumeration form of the DNN estimate.

    Enumerates every size-``s`` subsample, takes its 1-nearest-neighbor
    response (ties broken by the stable global distance order), and
    averages.  Exists as a test oracle; refuses beyond
    ``C(n, s) <= 10**6`` combinations.
    """
    n = data.n
    s = check_scale(s, n)
    n_combos = math.comb(n, s)
    if n_combos > _ORACLE_MAX_COMBINATIONS:
        raise GuardError(
            f"C({n}, {s}) = {n_combos} subsamples exceeds the "
            f"{_ORACLE_MAX_COMBINATIONS} enumeration guard"
        )
    order = order_by_distance(data, x)
    rank = np.empty(n, dtype=np.int64)
    rank[order.perm] = np.arange(n)
    rank_list = rank.tolist()
    y = data.response
    total = 0.0
    for combo in itertools.combinations(range(n), s):
        nearest = min(combo, key=rank_list.__getitem__)
        total += y[nearest]
    return total / n_combos


def knn_estimate(data: Dataset, x, k: int) -> float:
    """Classical k-nearest-neighbor estimate: unweighted mean of the
    ``k`` closest responses."""
    k = check_scale(k, data.n, name="k")
    order = order_by_distance(data, x)
    return float(data.response[order.perm[:k]].mean())
