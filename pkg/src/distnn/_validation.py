"""Small input-validation helpers used across modules."""
from __future__ import annotations

import numpy as np

from .errors import UsageError


def check_query_point(x, d: int) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float vector of length ``d``."""
    q = np.asarray(x, dtype=np.float64)
    if q.ndim != 1:
        raise UsageError(f"query point must be 1-D, got shape {q.shape}")
    if q.shape[0] != d:
        raise UsageError(
            f"query point has dimension {q.shape[0]}, data has d={d}"
        )
    if not np.all(np.isfinite(q)):
        raise UsageError("query point contains non-finite entries")
    return q


def check_scale(s, n: int, name: str = "s") -> int:
    """Validate an integer scale in ``1..n``."""
    s_int = int(s)
    if s_int != s or not 1 <= s_int <= n:
        raise UsageError(f"{name}={s!r} outside the valid range 1..{n}")
    return s_int


def as_seed_int(seed) -> int:
    seed_int = int(seed)
    if seed_int < 0:
        raise UsageError(f"seed must be a nonnegative integer, got {seed!r}")
    return seed_int
