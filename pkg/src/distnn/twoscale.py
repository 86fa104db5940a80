"""Two-scale combination of DNN estimators and the scale tuner.

A single DNN estimate carries a leading bias proportional to
``s**(-2/d)`` whose coefficient does not depend on ``s``.  Combining two
scales with weights that sum to one and solve

    w1 * s1**(-2/d') + w2 * s2**(-2/d') = 0

cancels that leading term.  One of the two weights is always negative:
distant neighbors receive negative weight.  The scale pair is fixed to
``(s, 2s)`` with ``s`` the single tunable; general pairs remain available
through :func:`two_scale_weights` for experimentation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_query_point
from .core import dnn_weights
from .data import Dataset
from .errors import UsageError
from .neighbors import order_by_distance

_DEFAULT_S_CAP = 250


@dataclass(frozen=True)
class TwoScalePlan:
    """Scales and combining weights of a two-scale estimate.

    ``w1 + w2 == 1`` exactly (``w2`` is computed as ``1 - w1``) and the
    bias-cancellation identity holds to rounding.
    """

    s1: int
    s2: int
    weight_dim: int
    w1: float
    w2: float


@dataclass(frozen=True)
class TuneTrace:
    """Record of a curvature-tuning scan.

    ``scales`` lists every scale whose two-scale estimate was evaluated,
    ``first_diffs`` the absolute successive differences, and
    ``second_diffs`` their differences.  ``hit_cap`` flags the fallback
    branch where no curvature sign change appeared by ``s_max``.
    """

    scales: np.ndarray
    estimates: np.ndarray
    first_diffs: np.ndarray
    second_diffs: np.ndarray
    chosen_s: int
    hit_cap: bool


def default_weight_dim(d: int) -> int:
    """Effective exponent dimension: ``min(d, 3)``.

    Combining weights grow rapidly with the exponent dimension and
    sacrifice variance, so dimensions above three fall back to the d=3
    weights.  Callers may override with the exact dimension.
    """
    if d < 1:
        raise UsageError(f"dimension must be >= 1, got {d}")
    return min(int(d), 3)


def two_scale_weights(s1: int, s2: int, weight_dim: int) -> TwoScalePlan:
    """Solve the 2x2 bias-cancellation system for scales ``s1 < s2``.

    Raises
    ------
    UsageError
        If ``s1 == s2`` (singular system) or the scales are not ordered.
    """
    s1, s2 = int(s1), int(s2)
    weight_dim = int(weight_dim)
    if weight_dim < 1:
        raise UsageError(f"weight_dim must be >= 1, got {weight_dim}")
    if s1 == s2:
        raise UsageError(f"s1 == s2 == {s1} makes the weight system singular")
    if not 1 <= s1 < s2:
        raise UsageError(f"need 1 <= s1 < s2, got s1={s1}, s2={s2}")
    expo = -2.0 / weight_dim
    a1 = float(s1) ** expo
    a2 = float(s2) ** expo
    w1 = a2 / (a2 - a1)
    return TwoScalePlan(s1=s1, s2=s2, weight_dim=weight_dim, w1=w1, w2=1.0 - w1)


def two_scale_weight_vector(n: int, s: int, weight_dim: int) -> np.ndarray:
    """Combined per-observation weights ``w1*W(s) + w2*W(2s)``.

    Sums to one and always contains negative entries.
    """
    _check_pair(n, s)
    plan = two_scale_weights(s, 2 * s, weight_dim)
    return plan.w1 * dnn_weights(n, s).w + plan.w2 * dnn_weights(n, 2 * s).w


def _check_pair(n: int, s: int) -> None:
    if not 1 <= s or 2 * s > n:
        raise UsageError(f"two-scale pair (s, 2s) needs 2*s <= n; got s={s}, n={n}")


def two_scale_estimate(data: Dataset, x, s: int, weight_dim: int | None = None) -> float:
    """Two-scale DNN estimate at ``x`` using the pair ``(s, 2s)``."""
    weight_dim = default_weight_dim(data.d) if weight_dim is None else int(weight_dim)
    _check_pair(data.n, int(s))
    q = check_query_point(x, data.d)
    order = order_by_distance(data, q)
    y_ordered = data.response[order.perm]
    return float(two_scale_weight_vector(data.n, int(s), weight_dim) @ y_ordered)


def _scan_second_differences(estimates: np.ndarray, s_max: int) -> tuple[int, bool, int]:
    """Apply the curvature stopping rule to a trace of estimates.

    Returns ``(chosen_s, hit_cap, n_evaluated)`` where ``n_evaluated`` is
    how many leading entries of the trace the rule actually examined.  The
    baseline sign is the first nonzero second difference; exact zeros are
    skipped on both sides of the comparison.
    """
    deltas = np.abs(np.diff(estimates))
    second = np.diff(deltas)
    baseline = 0.0
    for idx, value in enumerate(second):  # idx 0 is the scale-1 difference
        sign = np.sign(value)
        if sign == 0.0:
            continue
        if baseline == 0.0:
            baseline = sign
        elif sign != baseline:
            chosen = idx + 2  # rule index s = idx + 1, chosen s = s + 1
            return chosen, False, idx + 3
    return s_max, True, len(estimates)


def tune_scale(
    data: Dataset,
    x,
    weight_dim: int | None = None,
    s_max: int | None = None,
) -> TuneTrace:
    """Pick the subsampling scale by the change-of-curvature rule.

    Two-scale estimates ``T(s)`` are computed for ``s = 1, 2, ...``; the
    scan stops at the first ``s`` whose second difference of ``|T(s+1) -
    T(s)|`` flips sign against the initial one, choosing ``s + 1``.  If no
    flip appears by ``s_max`` (default ``min(n // 2, 250)``), ``s_max`` is
    returned with ``hit_cap`` set.

    Raises
    ------
    UsageError
        If ``n < 6`` (no second difference exists) or ``s_max`` exceeds
        ``n // 2``.
    """
    n = data.n
    if n < 6:
        raise UsageError(f"tuning needs n >= 6 to form a second difference, got n={n}")
    cap = n // 2
    if s_max is None:
        s_max = min(cap, _DEFAULT_S_CAP)
    s_max = int(s_max)
    if not 3 <= s_max <= cap:
        raise UsageError(f"s_max must be in 3..{cap}, got {s_max}")
    weight_dim = default_weight_dim(data.d) if weight_dim is None else int(weight_dim)
    q = check_query_point(x, data.d)
    order = order_by_distance(data, q)
    y_ordered = data.response[order.perm]
    # Evaluate lazily in chunks; the rule usually stops long before s_max.
    estimates: list[float] = []
    chunk = 16
    while True:
        upto = min(len(estimates) + chunk, s_max)
        estimates.extend(
            float(two_scale_weight_vector(n, s, weight_dim) @ y_ordered)
            for s in range(len(estimates) + 1, upto + 1)
        )
        chosen, hit_cap, used = _scan_second_differences(np.asarray(estimates), s_max)
        if not hit_cap or upto == s_max:
            break
    scales = np.arange(1, used + 1)
    trace = np.asarray(estimates[:used])
    return TuneTrace(
        scales=scales,
        estimates=trace,
        first_diffs=np.abs(np.diff(trace)),
        second_diffs=np.diff(np.abs(np.diff(trace))),
        chosen_s=chosen,
        hit_cap=hit_cap,
    )
