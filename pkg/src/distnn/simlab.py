"""Monte Carlo laboratory: benchmark data models, metric runs, trade-off scans.

Eleven benchmark settings are built in.  Setting 1 is a smooth
three-dimensional regression; setting 2 embeds the same signal among
irrelevant noise features (d=10); settings 3-11 raise the dimensionality
from 10 to 50 in steps of five with a log-of-squared-sum response.  The
control arm is degenerate at zero throughout, so the treatment effect at
a point equals the regression function there.

Every replication draws from an independent stream derived from
``(seed, replication index)``, making runs bit-reproducible regardless of
scheduling, and trade-off scans reuse the same per-replication datasets
across the whole grid (common random numbers).
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ._validation import as_seed_int
from .core import dnn_weight_matrix
from .data import Dataset
from .errors import GuardError, UsageError
from .inference import resample_estimates
from .neighbors import squared_distances
from .theory import AnalyticDgp
from .twoscale import (
    _DEFAULT_S_CAP,
    _scan_second_differences,
    default_weight_dim,
    two_scale_weights,
)

FAMILIES = ("dnn", "two-scale-dnn", "knn", "two-scale-knn")

_SETTING_DIMS = {1: 3, 2: 10, 3: 10, 4: 15, 5: 20, 6: 25, 7: 30, 8: 35,
                 9: 40, 10: 45, 11: 50}
_MAX_REDRAWS = 100


@dataclass(frozen=True)
class DgpSpec:
    """A simulation data-generating process.

    ``mean`` maps an ``(m, d)`` array of feature rows to ``m`` noiseless
    responses.  ``random_coords`` lists the coordinates drawn uniformly on
    [0, 1] for random test points; the remaining coordinates stay zero.
    """

    setting: int | str
    d: int
    n: int
    noise_sd: float
    mean: Callable[[np.ndarray], np.ndarray]
    fixed_point: np.ndarray
    random_coords: tuple[int, ...]

    def __post_init__(self):
        if self.n < 2:
            raise UsageError(f"sample size must be >= 2, got {self.n}")
        if self.d < 1:
            raise UsageError(f"dimension must be >= 1, got {self.d}")
        if self.noise_sd < 0:
            raise UsageError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.setting in _SETTING_DIMS and self.d != _SETTING_DIMS[self.setting]:
            raise UsageError(
                f"setting {self.setting} has d={_SETTING_DIMS[self.setting]}, "
                f"got d={self.d}"
            )
        point = np.asarray(self.fixed_point, dtype=np.float64)
        if point.shape != (self.d,):
            raise UsageError(
                f"fixed_point must have shape ({self.d},), got {point.shape}"
            )
        object.__setattr__(self, "fixed_point", point)
        if any(not 0 <= c < self.d for c in self.random_coords):
            raise UsageError("random_coords indices out of range")


class LongRow(NamedTuple):
    """One per-replication record of the long-format output."""

    setting: str
    estimator: str
    point_kind: str
    rep: int
    s_or_k: int
    estimate: float
    truth: float


@dataclass(frozen=True)
class McMetrics:
    """Aggregate Monte Carlo metrics at the fixed and random test points."""

    bias_fixed: float
    mse_fixed: float
    mc_var_fixed: float
    est_var_fixed: float
    bias_random: float
    mse_random: float
    reps: int
    seed: int

    def __post_init__(self):
        values = (self.bias_fixed, self.mse_fixed, self.mc_var_fixed,
                  self.est_var_fixed, self.bias_random, self.mse_random)
        if not all(np.isfinite(v) for v in values):
            raise UsageError(f"non-finite metrics: {values}")
        slack = 1e-9 * max(1.0, self.mse_fixed)
        if self.mse_fixed < self.bias_fixed**2 - slack:
            raise UsageError("mse_fixed smaller than squared bias")


@dataclass(frozen=True)
class TradeoffCurve:
    """Bias and MSE along a grid of scales (or neighborhood sizes)."""

    family: str
    grid: np.ndarray
    bias: np.ndarray
    mse: np.ndarray


def _mean_setting1(X: np.ndarray) -> np.ndarray:
    return (X[:, 0] - 1) ** 2 + (X[:, 1] + 1) ** 3 - 3 * X[:, 2]


def _mean_setting2(X: np.ndarray) -> np.ndarray:
    return (X[:, 2] - 1) ** 2 + (X[:, 4] + 1) ** 3 - 3 * X[:, 6]


def _make_logsum_mean(j: int) -> Callable[[np.ndarray], np.ndarray]:
    def mean(X: np.ndarray) -> np.ndarray:
        Z = X[:, :j]
        inner = (Z**3 - 2 * Z**2 + 2 * Z).sum(axis=1)
        with np.errstate(divide="ignore"):
            return np.log(inner**2)

    return mean


def make_spec(setting: int, n: int = 1000, noise_sd: float = 1.0) -> DgpSpec:
    """Build one of the eleven benchmark settings."""
    if setting not in _SETTING_DIMS:
        raise UsageError(f"setting must be 1..11, got {setting}")
    d = _SETTING_DIMS[setting]
    if setting == 1:
        mean = _mean_setting1
        fixed = np.array([0.5, -0.5, 0.5])
        coords = (0, 1, 2)
    elif setting == 2:
        mean = _mean_setting2
        fixed = np.zeros(d)
        fixed[[2, 4, 6]] = (0.5, -0.5, 0.5)
        coords = (2, 4, 6)
    else:
        j = d
        mean = _make_logsum_mean(j)
        n_active = (j - 1) // 2
        fixed = np.zeros(d)
        fixed[:n_active] = 0.5
        coords = tuple(range(n_active))
    return DgpSpec(
        setting=setting, d=d, n=int(n), noise_sd=float(noise_sd),
        mean=mean, fixed_point=fixed, random_coords=coords,
    )


def _std_normal_density(d: int):
    norm = (2 * np.pi) ** (-d / 2)

    def density(q: np.ndarray) -> float:
        return float(norm * np.exp(-0.5 * q @ q))

    def density_grad(q: np.ndarray) -> np.ndarray:
        return -q * density(q)

    return density, density_grad


def analytic_dgp(setting: int) -> AnalyticDgp:
    """Closed-form derivatives of a benchmark setting (settings 1 and 2).

    Used to cross-check Monte Carlo bias measurements against the
    theoretical leading-order bias.
    """
    if setting == 1:
        d = 3

        def grad(q):
            return np.array([2 * (q[0] - 1), 3 * (q[1] + 1) ** 2, -3.0])

        def hess(q):
            return np.diag([2.0, 6 * (q[1] + 1), 0.0])

        def mean(q):
            return float(_mean_setting1(q[None, :])[0])

    elif setting == 2:
        d = 10

        def grad(q):
            g = np.zeros(d)
            g[2] = 2 * (q[2] - 1)
            g[4] = 3 * (q[4] + 1) ** 2
            g[6] = -3.0
            return g

        def hess(q):
            h = np.zeros((d, d))
            h[2, 2] = 2.0
            h[4, 4] = 6 * (q[4] + 1)
            return h

        def mean(q):
            return float(_mean_setting2(q[None, :])[0])

    else:
        raise UsageError(
            f"closed-form derivatives available for settings 1 and 2, got {setting}"
        )
    density, density_grad = _std_normal_density(d)
    return AnalyticDgp(
        mean=mean, mean_grad=grad, mean_hess=hess,
        density=density, density_grad=density_grad,
        noise_sd=1.0, d=d,
    )


def truth_at(spec: DgpSpec, x) -> float:
    """Noiseless mean of the data model at a point."""
    q = np.asarray(x, dtype=np.float64)
    return float(spec.mean(q[None, :])[0])


def random_test_point(spec: DgpSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw a random test point: designated coordinates uniform on [0, 1],
    the rest zero."""
    point = np.zeros(spec.d)
    if spec.random_coords:
        point[list(spec.random_coords)] = rng.uniform(0, 1, len(spec.random_coords))
    return point


def generate(spec: DgpSpec, rep_seed) -> Dataset:
    """Draw one i.i.d. dataset from the data model.

    Standard-normal features and noise.  If the noiseless mean is
    non-finite anywhere (a measure-zero event for the log-sum settings),
    the whole draw is redone and counted with a warning.
    """
    rng = np.random.default_rng(rep_seed)
    for _ in range(_MAX_REDRAWS):
        X = rng.standard_normal((spec.n, spec.d))
        means = spec.mean(X)
        if np.all(np.isfinite(means)):
            break
        warnings.warn(
            f"degenerate mean in setting {spec.setting}; replicate redrawn",
            RuntimeWarning,
            stacklevel=2,
        )
    else:
        raise GuardError(
            f"{_MAX_REDRAWS} consecutive degenerate draws for setting {spec.setting}"
        )
    response = means + rng.standard_normal(spec.n) * spec.noise_sd
    return Dataset(features=X, response=response)


def _knn_row(n: int, k: int) -> np.ndarray:
    if not 1 <= k <= n:
        raise UsageError(f"k={k} outside the valid range 1..{n}")
    row = np.zeros(n)
    row[:k] = 1.0 / k
    return row


def _two_scale_knn_row(n: int, k: int, weight_dim: int) -> np.ndarray:
    if 2 * k > n:
        raise UsageError(f"two-scale pair (k, 2k) needs 2*k <= n; got k={k}, n={n}")
    plan = two_scale_weights(k, 2 * k, weight_dim)
    return plan.w1 * _knn_row(n, k) + plan.w2 * _knn_row(n, 2 * k)


def _combine_rows(low: np.ndarray, high: np.ndarray, scales, weight_dim: int) -> np.ndarray:
    """Combine per-scale weight rows with the matching two-scale weights."""
    w1 = np.array([two_scale_weights(int(s), 2 * int(s), weight_dim).w1
                   for s in scales])
    return w1[:, None] * low + (1.0 - w1)[:, None] * high


class _TwoScaleDnnTuner:
    """Precomputed two-scale weight rows for every scale up to ``s_max``."""

    def __init__(self, n: int, weight_dim: int, s_max: int):
        if not 3 <= s_max <= n // 2:
            raise UsageError(f"s_max must be in 3..{n // 2}, got {s_max}")
        base = dnn_weight_matrix(n, range(1, 2 * s_max + 1))
        self.rows = _combine_rows(
            base[:s_max], base[1::2][:s_max],
            range(1, s_max + 1), weight_dim,
        )
        self.s_max = s_max

    def estimate(self, y_ordered: np.ndarray) -> tuple[float, int]:
        trace = self.rows @ y_ordered
        chosen, _, _ = _scan_second_differences(trace, self.s_max)
        return float(trace[chosen - 1]), chosen


def _make_estimator(spec, family, s, k, weight_dim):
    """Return ``(estimate_fn, fixed_row)``.

    ``estimate_fn(y_ordered) -> (estimate, scale)``; ``fixed_row`` is the
    ordered-response weight row when the scale is fixed, else None (the
    tuned row varies per point).
    """
    n = spec.n
    if family not in FAMILIES:
        raise UsageError(f"estimator family must be one of {FAMILIES}, got {family!r}")
    wd = default_weight_dim(spec.d) if weight_dim is None else int(weight_dim)
    if family == "dnn":
        if s is None:
            raise UsageError("family 'dnn' needs an explicit scale s")
        row = dnn_weight_matrix(n, [int(s)])[0]
        return (lambda yo: (float(row @ yo), int(s))), row
    if family == "knn":
        if k is None:
            raise UsageError("family 'knn' needs an explicit neighborhood size k")
        row = _knn_row(n, int(k))
        return (lambda yo: (float(row @ yo), int(k))), row
    if family == "two-scale-knn":
        if k is None:
            raise UsageError("family 'two-scale-knn' needs an explicit k")
        row = _two_scale_knn_row(n, int(k), wd)
        return (lambda yo: (float(row @ yo), int(k))), row
    # two-scale-dnn
    if s is not None:
        if 2 * int(s) > n:
            raise UsageError(f"two-scale pair (s, 2s) needs 2*s <= n; got s={s}, n={n}")
        plan = two_scale_weights(int(s), 2 * int(s), wd)
        base = dnn_weight_matrix(n, [int(s), 2 * int(s)])
        row = plan.w1 * base[0] + plan.w2 * base[1]
        return (lambda yo: (float(row @ yo), int(s))), row
    return None, None  # tuned: handled by _TwoScaleDnnTuner


def _run(spec, family, reps, seed, boot_reps, s, k, weight_dim, s_max):
    if reps < 2:
        raise UsageError(f"reps must be >= 2, got {reps}")
    if boot_reps < 2:
        raise UsageError(f"boot_reps must be >= 2, got {boot_reps}")
    seed = as_seed_int(seed)
    estimate_fn, fixed_row = _make_estimator(spec, family, s, k, weight_dim)
    tuner = None
    if estimate_fn is None:
        wd = default_weight_dim(spec.d) if weight_dim is None else int(weight_dim)
        cap = s_max if s_max is not None else min(spec.n // 2, _DEFAULT_S_CAP)
        tuner = _TwoScaleDnnTuner(spec.n, wd, int(cap))

    def point_estimate(y_ordered):
        if tuner is not None:
            return tuner.estimate(y_ordered)
        return estimate_fn(y_ordered)

    truth_fixed = truth_at(spec, spec.fixed_point)
    children = np.random.SeedSequence(seed).spawn(reps)
    est_f = np.zeros(reps)
    var_f = np.zeros(reps)
    est_r = np.zeros(reps)
    truth_r = np.zeros(reps)
    rows: list[LongRow] = []
    for rep in range(reps):
        try:
            rng = np.random.default_rng(children[rep])
            data = generate(spec, rng)
            x_rand = random_test_point(spec, rng)
            d2_fixed = squared_distances(data.features, spec.fixed_point)
            order_fixed = np.argsort(d2_fixed, kind="stable")
            y_fixed = data.response[order_fixed]
            est_f[rep], s_fixed = point_estimate(y_fixed)
            boot_row = fixed_row if fixed_row is not None else tuner.rows[s_fixed - 1]
            idx = rng.integers(0, spec.n, (boot_reps, spec.n))
            boots = resample_estimates(data.response, d2_fixed, boot_row, idx)
            var_f[rep] = boots.var(ddof=1)
            d2_rand = squared_distances(data.features, x_rand)
            y_rand = data.response[np.argsort(d2_rand, kind="stable")]
            est_r[rep], s_rand = point_estimate(y_rand)
            truth_r[rep] = truth_at(spec, x_rand)
            rows.append(LongRow(str(spec.setting), family, "fixed", rep,
                                s_fixed, float(est_f[rep]), truth_fixed))
            rows.append(LongRow(str(spec.setting), family, "random", rep,
                                s_rand, float(est_r[rep]), float(truth_r[rep])))
        except Exception as exc:
            raise RuntimeError(f"replication {rep} failed: {exc}") from exc
    metrics = McMetrics(
        bias_fixed=float((est_f - truth_fixed).mean()),
        mse_fixed=float(((est_f - truth_fixed) ** 2).mean()),
        mc_var_fixed=float(est_f.var(ddof=1)),
        est_var_fixed=float(var_f.mean()),
        bias_random=float((est_r - truth_r).mean()),
        mse_random=float(((est_r - truth_r) ** 2).mean()),
        reps=reps,
        seed=seed,
    )
    return metrics, rows


def run_monte_carlo(
    spec: DgpSpec,
    family: str = "two-scale-dnn",
    *,
    reps: int,
    seed: int,
    boot_reps: int = 200,
    s: int | None = None,
    k: int | None = None,
    weight_dim: int | None = None,
    s_max: int | None = None,
) -> McMetrics:
    """Monte Carlo metrics for one estimator family on one data model.

    Each replication draws fresh data, estimates at the fixed test point
    (with a within-replication bootstrap variance at the frozen scale) and
    at a freshly drawn random point.  The two-scale DNN family tunes its
    scale per point unless ``s`` is given; the other families require an
    explicit ``s`` or ``k``.
    """
    metrics, _ = _run(spec, family, reps, seed, boot_reps, s, k, weight_dim, s_max)
    return metrics


def run_monte_carlo_rows(
    spec: DgpSpec,
    family: str = "two-scale-dnn",
    *,
    reps: int,
    seed: int,
    boot_reps: int = 200,
    s: int | None = None,
    k: int | None = None,
    weight_dim: int | None = None,
    s_max: int | None = None,
) -> tuple[McMetrics, list[LongRow]]:
    """Like :func:`run_monte_carlo`, also returning the long-format rows."""
    return _run(spec, family, reps, seed, boot_reps, s, k, weight_dim, s_max)


def _grid_matrix(spec, family, grid, weight_dim) -> np.ndarray:
    n = spec.n
    wd = default_weight_dim(spec.d) if weight_dim is None else int(weight_dim)
    if family == "dnn":
        return dnn_weight_matrix(n, grid)
    if family == "knn":
        return np.vstack([_knn_row(n, int(g)) for g in grid])
    if family == "two-scale-knn":
        return np.vstack([_two_scale_knn_row(n, int(g), wd) for g in grid])
    if family == "two-scale-dnn":
        for g in grid:
            if 2 * int(g) > n:
                raise UsageError(f"grid value {g} violates 2*s <= n (n={n})")
        low = dnn_weight_matrix(n, grid)
        high = dnn_weight_matrix(n, [2 * int(g) for g in grid])
        return _combine_rows(low, high, grid, wd)
    raise UsageError(f"estimator family must be one of {FAMILIES}, got {family!r}")


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(list(grid), dtype=np.int64)
    if g.size == 0:
        raise UsageError("grid must be nonempty")
    if np.any(g < 1):
        raise UsageError("grid values must be >= 1")
    if np.any(np.diff(g) <= 0):
        raise UsageError("grid must be strictly increasing")
    return g


def scan_estimates(
    spec: DgpSpec,
    family: str,
    grid,
    *,
    reps: int,
    seed: int,
    weight_dim: int | None = None,
) -> np.ndarray:
    """Fixed-point estimates for every replication and grid value.

    Returns an array of shape ``(reps, len(grid))``.  All grid values see
    the same per-replication datasets (common random numbers).
    """
    if reps < 1:
        raise UsageError(f"reps must be >= 1, got {reps}")
    grid = _check_grid(grid)
    seed = as_seed_int(seed)
    weight_rows = _grid_matrix(spec, family, grid, weight_dim)
    children = np.random.SeedSequence(seed).spawn(reps)
    estimates = np.zeros((reps, grid.size))
    for rep in range(reps):
        data = generate(spec, children[rep])
        d2 = squared_distances(data.features, spec.fixed_point)
        y_ordered = data.response[np.argsort(d2, kind="stable")]
        estimates[rep] = weight_rows @ y_ordered
    return estimates


def tradeoff_scan(
    spec: DgpSpec,
    family: str,
    grid,
    *,
    reps: int,
    seed: int,
    weight_dim: int | None = None,
) -> TradeoffCurve:
    """Bias and MSE along a grid of scales at the fixed test point."""
    grid = _check_grid(grid)
    estimates = scan_estimates(
        spec, family, grid, reps=reps, seed=seed, weight_dim=weight_dim
    )
    truth = truth_at(spec, spec.fixed_point)
    return TradeoffCurve(
        family=family,
        grid=grid,
        bias=estimates.mean(axis=0) - truth,
        mse=((estimates - truth) ** 2).mean(axis=0),
    )


# ---------------------------------------------------------------------------
# CSV interfaces

LONG_HEADER = ("setting", "estimator", "point_kind", "rep", "s_or_k",
               "estimate", "truth")
METRICS_HEADER = ("setting", "estimator", "bias_fixed", "mse_fixed",
                  "var_fixed", "est_var_fixed", "bias_random", "mse_random")
CURVE_HEADER = ("s_or_k", "bias", "mse")


def write_long_csv(rows, stream, header_comment: str | None = None) -> None:
    if header_comment:
        stream.write(f"# {header_comment}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(LONG_HEADER)
    for row in rows:
        writer.writerow([row.setting, row.estimator, row.point_kind,
                         row.rep, row.s_or_k,
                         repr(float(row.estimate)), repr(float(row.truth))])


def write_metrics_csv(entries, stream, header_comment: str | None = None) -> None:
    """Write aggregate rows: ``entries`` holds (setting, estimator, metrics
    mapping) triples; missing metric values may be None."""
    if header_comment:
        stream.write(f"# {header_comment}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for setting, estimator, metrics in entries:
        row = [setting, estimator]
        for key in METRICS_HEADER[2:]:
            value = metrics.get(key)
            row.append("" if value is None else repr(float(value)))
        writer.writerow(row)


def write_curve_csv(curve: TradeoffCurve, stream, header_comment: str | None = None) -> None:
    if header_comment:
        stream.write(f"# {header_comment}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for g, b, m in zip(curve.grid, curve.bias, curve.mse):
        writer.writerow([int(g), repr(float(b)), repr(float(m))])


def metrics_as_mapping(metrics: McMetrics) -> dict:
    return {
        "bias_fixed": metrics.bias_fixed,
        "mse_fixed": metrics.mse_fixed,
        "var_fixed": metrics.mc_var_fixed,
        "est_var_fixed": metrics.est_var_fixed,
        "bias_random": metrics.bias_random,
        "mse_random": metrics.mse_random,
    }


def read_long_csv(path) -> list[LongRow]:
    """Read long-format rows, e.g. estimates produced by external tools."""
    rows: list[LongRow] = []
    with open(path, newline="", encoding="utf-8") as fh:
        content = (line for line in fh if not line.startswith("#"))
        reader = csv.reader(content)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LONG_HEADER:
            raise UsageError(
                f"{path}: expected header {','.join(LONG_HEADER)}"
            )
        for record in reader:
            rows.append(LongRow(
                setting=record[0], estimator=record[1], point_kind=record[2],
                rep=int(record[3]), s_or_k=int(record[4]),
                estimate=float(record[5]), truth=float(record[6]),
            ))
    return rows


def aggregate_rows(rows) -> list[tuple[str, str, dict]]:
    """Aggregate long rows into per-(setting, estimator) metric mappings.

    Bootstrap variances are not part of the long format, so
    ``est_var_fixed`` is None in the result.
    """
    groups: dict[tuple[str, str], list[LongRow]] = {}
    for row in rows:
        groups.setdefault((row.setting, row.estimator), []).append(row)
    out = []
    for (setting, estimator), members in sorted(groups.items()):
        fixed = np.array([(r.estimate, r.truth) for r in members
                          if r.point_kind == "fixed"])
        random_ = np.array([(r.estimate, r.truth) for r in members
                            if r.point_kind == "random"])
        metrics: dict = {"est_var_fixed": None}
        for kind, arr in (("fixed", fixed), ("random", random_)):
            if arr.size == 0:
                metrics[f"bias_{kind}"] = None
                metrics[f"mse_{kind}"] = None
                if kind == "fixed":
                    metrics["var_fixed"] = None
                continue
            err = arr[:, 0] - arr[:, 1]
            metrics[f"bias_{kind}"] = float(err.mean())
            metrics[f"mse_{kind}"] = float((err**2).mean())
            if kind == "fixed":
                metrics["var_fixed"] = (
                    float(arr[:, 0].var(ddof=1)) if arr.shape[0] > 1 else None
                )
        out.append((setting, estimator, metrics))
    return out
