"""Treatment-effect estimation and stratified bootstrap inference.

The effect at a point is the difference of two-scale DNN regression
estimates fit separately on the treated and control strata, each with its
own tuned subsampling scale.  Inference bootstraps that difference by
resampling within each stratum at the frozen tuned scales; being an
L-statistic, the estimator needs no plug-in variance formula.
"""
from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from ._validation import as_seed_int, check_query_point
from .data import Dataset, StratifiedView
from .errors import DataError, UsageError
from .neighbors import squared_distances
from .twoscale import (
    TuneTrace,
    default_weight_dim,
    tune_scale,
    two_scale_weight_vector,
)

_BOOT_CHUNK = 512


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs shared by the estimation entry points.

    ``s`` skips tuning and fixes the subsampling scale; ``weight_dim``
    overrides the effective exponent dimension; ``s_max`` caps the tuning
    scan.
    """

    weight_dim: int | None = None
    s: int | None = None
    s_max: int | None = None


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with bootstrap variance and confidence interval."""

    point: float
    variance: float
    ci_low: float
    ci_high: float
    level: float
    boot_reps: int
    seed: int
    interval: str
    s_treated: int
    s_control: int | None
    tune_treated: TuneTrace | None
    tune_control: TuneTrace | None
    n_discarded: int


@dataclass(frozen=True)
class _Arm:
    y: np.ndarray
    d2: np.ndarray
    s: int
    trace: TuneTrace | None
    w_row: np.ndarray
    point: float


def _prepare_arm(data: Dataset, x, config: EstimatorConfig, label: str) -> _Arm:
    weight_dim = (
        default_weight_dim(data.d)
        if config.weight_dim is None
        else int(config.weight_dim)
    )
    n = data.n
    if config.s is not None:
        s = int(config.s)
        if not 1 <= s or 2 * s > n:
            raise UsageError(
                f"{label}: fixed scale s={s} needs 2*s <= n (n={n})"
            )
        trace = None
    else:
        if n < 6:
            raise UsageError(
                f"{label}: too few observations to tune a scale (n={n} < 6)"
            )
        trace = tune_scale(data, x, weight_dim=weight_dim, s_max=config.s_max)
        s = trace.chosen_s
    q = check_query_point(x, data.d)
    d2 = squared_distances(data.features, q)
    order = np.argsort(d2, kind="stable")
    w_row = two_scale_weight_vector(n, s, weight_dim)
    point = float(w_row @ data.response[order])
    return _Arm(y=data.response, d2=d2, s=s, trace=trace, w_row=w_row, point=point)


def resample_estimates(y: np.ndarray, d2: np.ndarray, w_row: np.ndarray,
                       idx: np.ndarray) -> np.ndarray:
    """Estimates of ``w_row @ ordered-response`` for resampled row indices.

    ``idx`` has one replicate per row; each replicate is re-sorted by its
    resampled distances with the stable tie rule.
    """
    order = np.argsort(d2[idx], axis=1, kind="stable")
    return np.take_along_axis(y[idx], order, axis=1) @ w_row


def _bootstrap_replicates(arms: list[_Arm], boot_reps: int, seed: int) -> np.ndarray:
    """Per-replicate estimates (treated minus control when two arms).

    Replicate ``r`` draws all of its resamples from an independent stream
    derived deterministically from ``(seed, r)``, so results do not depend
    on execution order.
    """
    children = np.random.SeedSequence(seed).spawn(boot_reps)
    out = np.zeros(boot_reps)
    for lo in range(0, boot_reps, _BOOT_CHUNK):
        hi = min(lo + _BOOT_CHUNK, boot_reps)
        per_arm = []
        for arm in arms:
            n = arm.y.shape[0]
            idx = np.empty((hi - lo, n), dtype=np.intp)
            per_arm.append(idx)
        for r in range(lo, hi):
            rng = np.random.default_rng(children[r])
            for arm, idx in zip(arms, per_arm):
                idx[r - lo] = rng.integers(0, arm.y.shape[0], arm.y.shape[0])
        ests = [
            resample_estimates(arm.y, arm.d2, arm.w_row, idx)
            for arm, idx in zip(arms, per_arm)
        ]
        out[lo:hi] = ests[0] if len(ests) == 1 else ests[0] - ests[1]
    return out


def _summarize(
    arms: list[_Arm],
    point: float,
    boot_reps: int,
    level: float,
    seed: int,
    interval: str,
) -> EstimateReport:
    if boot_reps < 2:
        raise UsageError(f"boot_reps must be >= 2, got {boot_reps}")
    if not 0.0 < level < 1.0:
        raise UsageError(f"confidence level must be in (0, 1), got {level}")
    if interval not in ("percentile", "normal"):
        raise UsageError(f"interval must be 'percentile' or 'normal', got {interval!r}")
    seed = as_seed_int(seed)
    replicates = _bootstrap_replicates(arms, boot_reps, seed)
    finite = np.isfinite(replicates)
    n_discarded = int((~finite).sum())
    kept = replicates[finite]
    if kept.size < 2:
        raise DataError(
            f"only {kept.size} finite bootstrap replicates out of {boot_reps}"
        )
    variance = float(kept.var(ddof=1))
    alpha = 1.0 - level
    if interval == "percentile":
        ci_low, ci_high = (float(v) for v in np.quantile(kept, [alpha / 2, 1 - alpha / 2]))
    else:
        z = NormalDist().inv_cdf(1 - alpha / 2)
        half = z * variance**0.5
        ci_low, ci_high = point - half, point + half
    treated = arms[0]
    control = arms[1] if len(arms) > 1 else None
    return EstimateReport(
        point=point,
        variance=variance,
        ci_low=ci_low,
        ci_high=ci_high,
        level=level,
        boot_reps=boot_reps,
        seed=seed,
        interval=interval,
        s_treated=treated.s,
        s_control=control.s if control is not None else None,
        tune_treated=treated.trace,
        tune_control=control.trace if control is not None else None,
        n_discarded=n_discarded,
    )


def hte_estimate(view: StratifiedView, x, config: EstimatorConfig | None = None) -> float:
    """Treatment-effect point estimate at ``x``: treated-arm two-scale
    estimate minus control-arm two-scale estimate, each at its own tuned
    scale."""
    config = config or EstimatorConfig()
    treated = _prepare_arm(view.treated, x, config, "treated stratum")
    control = _prepare_arm(view.control, x, config, "control stratum")
    return treated.point - control.point


def bootstrap_report(
    view: StratifiedView,
    x,
    boot_reps: int,
    level: float = 0.95,
    seed: int = 0,
    config: EstimatorConfig | None = None,
    interval: str = "percentile",
) -> EstimateReport:
    """Treatment-effect estimate with stratified-bootstrap inference.

    Scales are tuned once on the original strata and frozen; every
    replicate redraws rows with replacement within each stratum and
    recomputes the difference.  Non-finite replicates are discarded and
    counted in the report.
    """
    config = config or EstimatorConfig()
    treated = _prepare_arm(view.treated, x, config, "treated stratum")
    control = _prepare_arm(view.control, x, config, "control stratum")
    return _summarize(
        [treated, control], treated.point - control.point,
        boot_reps, level, seed, interval,
    )


def regression_report(
    data: Dataset,
    x,
    boot_reps: int,
    level: float = 0.95,
    seed: int = 0,
    config: EstimatorConfig | None = None,
    interval: str = "percentile",
) -> EstimateReport:
    """Single-sample regression estimate with bootstrap inference.

    Same machinery as :func:`bootstrap_report` with one arm; serves plain
    conditional-mean estimation and the degenerate-control convention.
    """
    config = config or EstimatorConfig()
    arm = _prepare_arm(data, x, config, "sample")
    return _summarize([arm], arm.point, boot_reps, level, seed, interval)
