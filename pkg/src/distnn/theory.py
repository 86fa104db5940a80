"""Closed-form bias quantities for analytically known data models.

These are test-time oracles: given a regression function, covariate
density, and their derivatives at a point, the leading finite-sample bias
of the DNN estimator is

    c * s**(-2/d),
    c = Gamma(2/d + 1) * [f*tr(mu'') + 2*mu'.f'] / (2*d*V_d**(2/d)*f**(1+2/d)),

with ``V_d`` the unit-ball volume.  Monte Carlo measurements are checked
against these values in the test suite; the package never estimates ``c``
from data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import check_query_point
from .errors import UsageError


@dataclass(frozen=True)
class AnalyticDgp:
    """A data-generating process with hand-coded derivatives.

    ``mean``/``density`` map a length-``d`` point to a scalar;
    ``mean_grad``/``density_grad`` to a length-``d`` vector; ``mean_hess``
    to a symmetric ``d x d`` matrix.  The density must be positive at
    every queried point.
    """

    mean: Callable[[np.ndarray], float]
    mean_grad: Callable[[np.ndarray], np.ndarray]
    mean_hess: Callable[[np.ndarray], np.ndarray]
    density: Callable[[np.ndarray], float]
    density_grad: Callable[[np.ndarray], np.ndarray]
    noise_sd: float
    d: int


def unit_ball_volume(d: int) -> float:
    """Volume of the d-dimensional Euclidean unit ball."""
    if d < 1:
        raise UsageError(f"dimension must be >= 1, got {d}")
    return math.exp((d / 2) * math.log(math.pi) - math.lgamma(1 + d / 2))


def bias_coefficient(dgp: AnalyticDgp, x) -> float:
    """Coefficient of the ``s**(-2/d)`` leading bias term at ``x``.

    Raises
    ------
    UsageError
        If the density is not strictly positive at ``x``.
    """
    q = check_query_point(x, dgp.d)
    fx = float(dgp.density(q))
    if fx <= 0:
        raise UsageError(f"density must be positive at the query point, got {fx}")
    d = dgp.d
    trace_hess = float(np.trace(np.asarray(dgp.mean_hess(q), dtype=np.float64)))
    grad_dot = float(
        np.asarray(dgp.mean_grad(q), dtype=np.float64)
        @ np.asarray(dgp.density_grad(q), dtype=np.float64)
    )
    numerator = fx * trace_hess + 2.0 * grad_dot
    # Gamma(2/d + 1) / V_d**(2/d) composed in log space; V_d underflows
    # directly for large d.
    log_vd = (d / 2) * math.log(math.pi) - math.lgamma(1 + d / 2)
    log_scale = math.lgamma(2 / d + 1) - (2 / d) * log_vd
    return math.exp(log_scale) * numerator / (2 * d * fx ** (1 + 2 / d))


def leading_bias(dgp: AnalyticDgp, x, s: int) -> float:
    """Leading-order bias ``c * s**(-2/d)`` of the scale-``s`` DNN estimate."""
    s = int(s)
    if s < 1:
        raise UsageError(f"subsampling scale must be >= 1, got {s}")
    return bias_coefficient(dgp, x) * float(s) ** (-2.0 / dgp.d)


def validate_derivatives(dgp: AnalyticDgp, x, step: float = 1e-5, rtol: float = 1e-4) -> None:
    """Check hand-coded derivatives against central finite differences.

    Guards against transcription errors in test DGPs: the mean gradient is
    checked against differences of the mean, the Hessian against
    differences of the gradient (and for symmetry), and the density
    gradient against differences of the density.

    Raises
    ------
    UsageError
        On any inconsistency beyond ``rtol`` (with a small absolute floor).
    """
    q = check_query_point(x, dgp.d)
    d = dgp.d

    def central(fun, target_shape):
        out = np.empty((d,) + target_shape)
        for j in range(d):
            h = np.zeros(d)
            h[j] = step
            out[j] = (np.asarray(fun(q + h)) - np.asarray(fun(q - h))) / (2 * step)
        return out

    def compare(label, got, expected):
        got = np.asarray(got, dtype=np.float64)
        if not np.allclose(got, expected, rtol=rtol, atol=10 * step):
            raise UsageError(
                f"{label} inconsistent with finite differences at {q.tolist()}: "
                f"analytic {got.tolist()} vs numeric {np.asarray(expected).tolist()}"
            )

    compare("mean_grad", dgp.mean_grad(q), central(dgp.mean, ()))
    hess = np.asarray(dgp.mean_hess(q), dtype=np.float64)
    if hess.shape != (d, d):
        raise UsageError(f"mean_hess must return a {d}x{d} matrix, got {hess.shape}")
    if not np.allclose(hess, hess.T, rtol=1e-10, atol=1e-12):
        raise UsageError("mean_hess must be symmetric")
    compare("mean_hess", hess, central(dgp.mean_grad, (d,)))
    compare("density_grad", dgp.density_grad(q), central(dgp.density, ()))
