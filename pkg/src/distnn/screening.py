"""Distance-correlation feature screening.

Distance correlation is computed from double-centered pairwise distance
matrices (the biased V-statistic form):

    dcor(u, v) = sqrt( dcov2(u, v) / sqrt(dvar2(u) * dvar2(v)) ),
    dcov2(u, v) = mean(A * B),

where ``A`` and ``B`` are the double-centered |u_i - u_j| and |v_i - v_j|
matrices.  The value lies in [0, 1] and is zero by convention when either
distance variance vanishes.  Screening ranks features by their distance
correlation with the response; near-zero features can be dropped before
estimation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import GuardError, UsageError

# Screening materializes O(chunk * n) distance blocks; cap the sample size
# so a single run stays within desk-scale memory.
_SCREEN_N_CAP = 20_000
_CHUNK_ROWS = 2048


@dataclass(frozen=True)
class ScreenResult:
    """Per-feature distance correlations and the retained index set.

    ``kept`` holds 0-based feature indices in ascending order; ``rule``
    describes the retention rule that produced it.
    """

    dcor: np.ndarray
    kept: tuple[int, ...]
    rule: str


def _check_vector(u) -> np.ndarray:
    u = np.ascontiguousarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise UsageError("distance correlation expects 1-D vectors")
    if u.shape[0] < 2:
        raise UsageError(f"need at least 2 observations, got {u.shape[0]}")
    if not np.all(np.isfinite(u)):
        raise UsageError("inputs contain non-finite entries")
    return u


def _row_means(u: np.ndarray, chunk: int) -> tuple[np.ndarray, float]:
    n = u.shape[0]
    sums = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        sums[lo:hi] = np.abs(u[lo:hi, None] - u[None, :]).sum(axis=1)
    row = sums / n
    return row, float(row.mean())


def _dcor_centered(u, row_u, grand_u, v, row_v, grand_v, chunk) -> float:
    """Distance correlation from precomputed row/grand means."""
    n = u.shape[0]
    s_ab = s_aa = s_bb = 0.0
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        a = np.abs(u[lo:hi, None] - u[None, :])
        a -= row_u[lo:hi, None]
        a -= row_u[None, :]
        a += grand_u
        b = np.abs(v[lo:hi, None] - v[None, :])
        b -= row_v[lo:hi, None]
        b -= row_v[None, :]
        b += grand_v
        s_ab += float((a * b).sum())
        s_aa += float((a * a).sum())
        s_bb += float((b * b).sum())
    nn = float(n) * n
    dvar_u = s_aa / nn
    dvar_v = s_bb / nn
    if dvar_u <= 0.0 or dvar_v <= 0.0:
        return 0.0
    dcov2 = max(s_ab / nn, 0.0)
    return float(np.sqrt(dcov2 / np.sqrt(dvar_u * dvar_v)))


def distance_correlation(u, v, _chunk: int = _CHUNK_ROWS) -> float:
    """Distance correlation between two equal-length real vectors.

    Uses the double-centering definition with row-chunked accumulation so
    the full n x n matrices never materialize at once.

    Raises
    ------
    UsageError
        On length mismatch or fewer than two observations.
    """
    u = _check_vector(u)
    v = _check_vector(v)
    if u.shape != v.shape:
        raise UsageError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    row_u, grand_u = _row_means(u, _chunk)
    row_v, grand_v = _row_means(v, _chunk)
    return _dcor_centered(u, row_u, grand_u, v, row_v, grand_v, _chunk)


def screen_features(
    data: Dataset,
    top_k: int | None = None,
    threshold: float | None = None,
) -> ScreenResult:
    """Rank features by distance correlation with the response.

    Exactly one retention rule applies: keep the ``top_k`` features by
    distance correlation (ties broken toward the lower index), or keep
    every feature at or above ``threshold``.

    Raises
    ------
    UsageError
        If no rule or both rules are given, ``top_k`` exceeds ``d``, or
        ``threshold`` lies outside [0, 1].
    GuardError
        If the sample exceeds the screening size cap.
    """
    if data.n > _SCREEN_N_CAP:
        raise GuardError(
            f"screening capped at n={_SCREEN_N_CAP} observations, got {data.n}"
        )
    if (top_k is None) == (threshold is None):
        raise UsageError("specify exactly one of top_k or threshold")
    # The response's centering statistics are shared across all features.
    y = _check_vector(data.response)
    row_y, grand_y = _row_means(y, _CHUNK_ROWS)
    dcor = np.empty(data.d)
    for j in range(data.d):
        u = np.ascontiguousarray(data.features[:, j])
        row_u, grand_u = _row_means(u, _CHUNK_ROWS)
        dcor[j] = _dcor_centered(u, row_u, grand_u, y, row_y, grand_y, _CHUNK_ROWS)
    if top_k is not None:
        k = int(top_k)
        if not 1 <= k <= data.d:
            raise UsageError(f"top_k must be in 1..{data.d}, got {top_k}")
        ranked = np.argsort(-dcor, kind="stable")
        kept = tuple(sorted(int(j) for j in ranked[:k]))
        rule = f"top_k={k}"
    else:
        tau = float(threshold)
        if not 0.0 <= tau <= 1.0:
            raise UsageError(f"threshold must be in [0, 1], got {threshold}")
        kept = tuple(int(j) for j in np.flatnonzero(dcor >= tau))
        rule = f"threshold={tau}"
    return ScreenResult(dcor=dcor, kept=kept, rule=rule)
