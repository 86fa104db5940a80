"""Distance ordering of a sample relative to a query point.

Ordering is exact brute force: squared Euclidean distances with a stable
sort, so equal distances keep their original row order.  Exactness of the
permutation is contractual for the order-statistic weights downstream; an
approximate index would change the estimator itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_query_point
from .data import Dataset


@dataclass(frozen=True)
class NeighborOrder:
    """Row permutation sorted by ascending distance to a query point.

    ``perm[i]`` is the row index of the (i+1)-th nearest observation and
    ``dists[i]`` its Euclidean distance.
    """

    perm: np.ndarray
    dists: np.ndarray


def squared_distances(features: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance of every row of ``features`` to ``x``."""
    diff = features - x
    return np.einsum("ij,ij->i", diff, diff)


def order_by_distance(data: Dataset, x) -> NeighborOrder:
    """Stable ascending distance order of ``data`` rows around ``x``.

    Squared distances drive the comparison (monotone-equivalent, no square
    roots); reported distances are the true ones.
    """
    q = check_query_point(x, data.d)
    d2 = squared_distances(data.features, q)
    perm = np.argsort(d2, kind="stable")
    return NeighborOrder(perm=perm, dists=np.sqrt(d2[perm]))
