"""Observational-sample container, treatment stratification, and CSV I/O.

The on-disk format is a headered CSV with feature columns ``x1..xd``, an
optional binary treatment column ``w``, and a response column ``y``.
Column order is free, names are fixed.  Missing or non-finite cells are
rejected rather than imputed, and the 0-based file row index is carried
through as the tie-breaking identity for neighbor ordering.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError

_FEATURE_RE = re.compile(r"^x([1-9][0-9]*)$")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """An i.i.d. sample of features, responses, and optional treatment flags.

    Parameters
    ----------
    features : ndarray of shape (n, d)
        Covariate rows; every entry must be finite.
    response : ndarray of shape (n,)
        Scalar outcomes; every entry must be finite.
    treatment : ndarray of shape (n,) or None
        Binary assignment indicator.  When present, both strata must
        contain at least two observations.

    All arrays are copied and marked read-only so instances can be shared
    across threads.
    """

    features: np.ndarray
    response: np.ndarray
    treatment: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True, order="C")
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 2:
            raise DataError(f"need at least 2 observations, got {n}")
        if d < 1:
            raise DataError("need at least 1 feature column")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite entries")
        y = np.array(self.response, dtype=np.float64, copy=True)
        if y.shape != (n,):
            raise DataError(
                f"response must have shape ({n},), got {y.shape}"
            )
        if not np.all(np.isfinite(y)):
            raise DataError("response contains non-finite entries")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "response", _frozen(y))
        if self.treatment is not None:
            w = np.asarray(self.treatment)
            if w.shape != (n,):
                raise DataError(
                    f"treatment must have shape ({n},), got {w.shape}"
                )
            if not np.all(np.isin(w, (0, 1))):
                raise DataError("treatment values must be 0 or 1")
            w = w.astype(np.int8)
            for label, count in (("control", int((w == 0).sum())),
                                 ("treated", int((w == 1).sum()))):
                if count == 0:
                    raise DataError(f"{label} stratum empty")
                if count < 2:
                    raise DataError(
                        f"{label} stratum has fewer than 2 observations"
                    )
            object.__setattr__(self, "treatment", _frozen(w))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class StratifiedView:
    """Treatment/control partition of a parent :class:`Dataset`.

    ``treated_rows`` and ``control_rows`` record the parent row indices in
    their original order, so concatenating the strata along the recorded
    permutation reconstructs the parent exactly.
    """

    treated: Dataset
    control: Dataset
    treated_rows: np.ndarray = field(repr=False)
    control_rows: np.ndarray = field(repr=False)


def split_by_treatment(data: Dataset) -> StratifiedView:
    """Partition ``data`` by treatment flag, preserving row order.

    Raises
    ------
    UsageError
        If the dataset carries no treatment column.
    """
    if data.treatment is None:
        raise UsageError("dataset has no treatment column to split on")
    mask = data.treatment == 1
    treated_rows = np.flatnonzero(mask)
    control_rows = np.flatnonzero(~mask)
    treated = Dataset(data.features[treated_rows], data.response[treated_rows])
    control = Dataset(data.features[control_rows], data.response[control_rows])
    return StratifiedView(
        treated=treated,
        control=control,
        treated_rows=_frozen(treated_rows),
        control_rows=_frozen(control_rows),
    )


def _parse_header(names: list[str]) -> tuple[list[int], int | None, int]:
    """Map header names to (feature column order, w index, y index)."""
    features: dict[int, int] = {}
    w_idx = None
    y_idx = None
    for col, name in enumerate(names):
        name = name.strip()
        m = _FEATURE_RE.match(name)
        if m:
            j = int(m.group(1))
            if j in features:
                raise DataError(f"duplicate feature column {name!r}")
            features[j] = col
        elif name == "w":
            if w_idx is not None:
                raise DataError("duplicate column 'w'")
            w_idx = col
        elif name == "y":
            if y_idx is not None:
                raise DataError("duplicate column 'y'")
            y_idx = col
        else:
            raise DataError(f"unrecognized column {name!r} in header")
    if y_idx is None:
        raise DataError("missing required column 'y'")
    if not features:
        raise DataError("no feature columns x1..xd found in header")
    d = max(features)
    missing = sorted(set(range(1, d + 1)) - set(features))
    if missing:
        raise DataError(f"feature columns not contiguous, missing x{missing[0]}")
    feature_cols = [features[j] for j in range(1, d + 1)]
    return feature_cols, w_idx, y_idx


def _parse_cell(raw: str, row: int, name: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"row {row}, column {name!r}: cannot parse {raw!r}") from None
    if math.isnan(value) or math.isinf(value):
        raise DataError(f"row {row}, column {name!r}: non-finite value {raw!r}")
    return value


def load_csv(path) -> Dataset:
    """Load a dataset from a headered CSV file.

    Rows keep their file order; parse failures report the 1-based data row
    and the offending column name.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        feature_cols, w_idx, y_idx = _parse_header(header)
        names = [h.strip() for h in header]
        d = len(feature_cols)
        rows_x: list[list[float]] = []
        rows_y: list[float] = []
        rows_w: list[int] = []
        for i, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise DataError(
                    f"row {i}: expected {len(header)} cells, got {len(record)}"
                )
            rows_x.append(
                [_parse_cell(record[c], i, names[c]) for c in feature_cols]
            )
            rows_y.append(_parse_cell(record[y_idx], i, "y"))
            if w_idx is not None:
                w = _parse_cell(record[w_idx], i, "w")
                if w not in (0.0, 1.0):
                    raise DataError(
                        f"row {i}, column 'w': value {w!r} not in {{0, 1}}"
                    )
                rows_w.append(int(w))
    if len(rows_y) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(rows_y)}")
    features = np.asarray(rows_x, dtype=np.float64).reshape(len(rows_y), d)
    treatment = np.asarray(rows_w, dtype=np.int8) if w_idx is not None else None
    return Dataset(features=features, response=np.asarray(rows_y), treatment=treatment)


def write_csv(data: Dataset, path) -> None:
    """Write ``data`` in the package CSV schema with round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = [f"x{j}" for j in range(1, data.d + 1)]
        if data.treatment is not None:
            header.append("w")
        header.append("y")
        writer.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.features[i]]
            if data.treatment is not None:
                row.append(str(int(data.treatment[i])))
            row.append(repr(float(data.response[i])))
            writer.writerow(row)
