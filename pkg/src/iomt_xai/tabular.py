"""Tabular dataset representation, CSV ingestion and preprocessing.

A :class:`FeatureTable` holds a dense float64 feature matrix with named
columns plus the raw text label of every row. All operations are pure and
return new tables; the arrays inside a table are flagged read-only.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IngestionError, NoUsableFeaturesError, PreconditionError

DEFAULT_NORMAL = "Normal"
DEFAULT_ATTACKS = ("DDoS", "MitM", "Ransomware", "Buffer_Overflow")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Named numeric feature columns plus one text label column.

    ``values`` has shape ``(n_rows, n_features)``; column ``j`` is named
    ``column_names[j]``. ``binary`` is ``None`` until :func:`binarize_labels`
    has run, then holds 0 (normal) / 1 (attack) per row.
    """

    column_names: tuple[str, ...]
    values: np.ndarray
    label_name: str
    labels: np.ndarray
    binary: np.ndarray | None = None

    def __post_init__(self) -> None:
        names = tuple(str(c) for c in self.column_names)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(names))
        if values.ndim != 2 or values.shape[1] != len(names):
            raise PreconditionError(
                f"values shape {values.shape} does not match {len(names)} column names"
            )
        if len(set(names)) != len(names):
            dupes = sorted(n for n, c in Counter(names).items() if c > 1)
            raise PreconditionError(f"duplicate column names: {dupes}")
        if self.label_name in names:
            raise PreconditionError(f"label column {self.label_name!r} is also a feature column")
        labels = np.asarray(self.labels, dtype=object).reshape(-1)
        if labels.shape[0] != values.shape[0]:
            raise PreconditionError(
                f"{labels.shape[0]} labels for {values.shape[0]} rows"
            )
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels))
        if self.binary is not None:
            binary = np.asarray(self.binary, dtype=np.int64).reshape(-1)
            if binary.shape[0] != values.shape[0]:
                raise PreconditionError("binary label vector has the wrong length")
            object.__setattr__(self, "binary", _frozen(binary))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.column_names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def take(self, rows: Sequence[int] | np.ndarray) -> "FeatureTable":
        """Return a table holding only ``rows`` (in the given order)."""
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureTable(
            self.column_names,
            self.values[rows],
            self.label_name,
            self.labels[rows],
            None if self.binary is None else self.binary[rows],
        )

    def select_columns(self, names: Iterable[str]) -> "FeatureTable":
        names = list(names)
        idx = [self.column_names.index(n) for n in names]
        return FeatureTable(tuple(names), self.values[:, idx], self.label_name, self.labels, self.binary)

    def with_values(self, values: np.ndarray) -> "FeatureTable":
        return FeatureTable(self.column_names, values, self.label_name, self.labels, self.binary)

    def equals(self, other: "FeatureTable") -> bool:
        """Exact equality of names, values (bitwise, NaN-aware) and labels."""
        if (self.column_names, self.label_name) != (other.column_names, other.label_name):
            return False
        if self.values.shape != other.values.shape:
            return False
        if not np.array_equal(self.values, other.values, equal_nan=True):
            return False
        if list(self.labels) != list(other.labels):
            return False
        if (self.binary is None) != (other.binary is None):
            return False
        return self.binary is None or bool(np.array_equal(self.binary, other.binary))


def concat_rows(first: FeatureTable, second: FeatureTable) -> FeatureTable:
    if first.column_names != second.column_names or first.label_name != second.label_name:
        raise PreconditionError("cannot concatenate tables with different schemas")
    binary = None
    if first.binary is not None and second.binary is not None:
        binary = np.concatenate([first.binary, second.binary])
    return FeatureTable(
        first.column_names,
        np.vstack([first.values, second.values]),
        first.label_name,
        np.concatenate([first.labels, second.labels]),
        binary,
    )


def class_counts(table: FeatureTable) -> dict[str, int]:
    """Histogram of raw labels, keys sorted for stable output."""
    counts = Counter(str(lbl) for lbl in table.labels)
    return {k: counts[k] for k in sorted(counts)}


# --------------------------------------------------------------------------
# ingestion


def _parse_cell(cell: str) -> float:
    cell = cell.strip()
    if not cell:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        return math.nan


def load_csv(path: str | Path, label_name: str) -> FeatureTable:
    """Read a header-first CSV into a :class:`FeatureTable`.

    Every non-label column becomes a float64 feature. Cells that are empty or
    not parseable as numbers become NaN; ``inf``/``Infinity`` stay infinite.
    Both are treated as missing by :func:`clean`.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path} is empty; a header row is required") from None
        if label_name not in header:
            raise IngestionError(f"label column {label_name!r} not found in header of {path}")
        label_idx = header.index(label_name)
        feature_idx = [i for i in range(len(header)) if i != label_idx]
        rows: list[list[float]] = []
        labels: list[str] = []
        for row_index, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"ragged row {row_index}: {len(row)} cells, header has {len(header)}"
                )
            rows.append([_parse_cell(row[i]) for i in feature_idx])
            labels.append(row[label_idx].strip())
    names = tuple(header[i] for i in feature_idx)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return FeatureTable(names, values, label_name, np.array(labels, dtype=object))


def write_csv(table: FeatureTable, path: str | Path) -> None:
    """Write ``table`` as CSV; floats use ``repr`` so they read back exactly."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*table.column_names, table.label_name])
        for row, label in zip(table.values, table.labels):
            writer.writerow([*(repr(float(v)) for v in row), label])


# --------------------------------------------------------------------------
# cleaning


@dataclass
class PreprocessReport:
    rows_in: int
    rows_out: int
    columns_in: int
    columns_out: int
    dropped_duplicate_rows: int
    dropped_missing_rows: int
    dropped_missing_columns: list[str]
    dropped_zero_variance_columns: list[str] = field(default_factory=list)
    class_counts_before: dict[str, int] = field(default_factory=dict)
    class_counts_after: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "columns_in": self.columns_in,
            "columns_out": self.columns_out,
            "dropped_duplicate_rows": self.dropped_duplicate_rows,
            "dropped_missing_rows": self.dropped_missing_rows,
            "dropped_missing_columns": list(self.dropped_missing_columns),
            "dropped_zero_variance_columns": list(self.dropped_zero_variance_columns),
            "class_counts_before": dict(self.class_counts_before),
            "class_counts_after": dict(self.class_counts_after),
        }


def clean(table: FeatureTable, missing_threshold: float = 0.0) -> tuple[FeatureTable, PreprocessReport]:
    """Drop incomplete columns and exact duplicate rows.

    A cell is missing when it is NaN or infinite. Columns whose missing
    fraction exceeds ``missing_threshold`` are removed; with a positive
    threshold, rows still holding a missing cell in a kept column are then
    removed. Duplicates are rows equal in every kept feature and in the raw
    label; the first occurrence survives and row order is preserved.
    """
    if not 0.0 <= missing_threshold <= 1.0:
        raise PreconditionError("missing_threshold must lie in [0, 1]")
    missing = ~np.isfinite(table.values)
    n = table.n_rows
    frac = missing.mean(axis=0) if n else np.zeros(table.n_features)
    keep_cols = frac <= missing_threshold
    dropped_cols = [c for c, k in zip(table.column_names, keep_cols) if not k]
    kept_names = [c for c, k in zip(table.column_names, keep_cols) if k]
    if not kept_names:
        raise NoUsableFeaturesError("every column has missing values")

    values = table.values[:, keep_cols]
    row_ok = np.isfinite(values).all(axis=1)
    complete = np.flatnonzero(row_ok)

    seen: set[tuple] = set()
    survivors = []
    for i in complete:
        key = (*values[i].tolist(), table.labels[i])
        if key in seen:
            continue
        seen.add(key)
        survivors.append(i)
    survivors = np.asarray(survivors, dtype=np.int64)

    out = FeatureTable(
        tuple(kept_names),
        values[survivors],
        table.label_name,
        table.labels[survivors],
        None if table.binary is None else table.binary[survivors],
    )
    report = PreprocessReport(
        rows_in=n,
        rows_out=out.n_rows,
        columns_in=table.n_features,
        columns_out=out.n_features,
        dropped_duplicate_rows=int(complete.size - survivors.size),
        dropped_missing_rows=int(n - complete.size),
        dropped_missing_columns=dropped_cols,
        class_counts_before=class_counts(table),
        class_counts_after=class_counts(out),
    )
    return out, report


def drop_zero_variance(table: FeatureTable) -> tuple[FeatureTable, list[str]]:
    """Remove columns holding fewer than two distinct values."""
    if table.n_rows == 0:
        varying = np.zeros(table.n_features, dtype=bool)
    else:
        varying = (table.values != table.values[0]).any(axis=0)
    dropped = [c for c, v in zip(table.column_names, varying) if not v]
    if not varying.any():
        raise NoUsableFeaturesError("all feature columns are constant")
    if not dropped:
        return table, []
    kept = [c for c, v in zip(table.column_names, varying) if v]
    return table.select_columns(kept), dropped


# --------------------------------------------------------------------------
# min-max scaling


@dataclass(frozen=True, eq=False)
class ScalerParams:
    columns: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self) -> None:
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != (len(self.columns),) or maxs.shape != mins.shape:
            raise PreconditionError("scaler bounds do not match column list")
        bad = [c for c, lo, hi in zip(self.columns, mins, maxs) if not hi > lo]
        if bad:
            raise PreconditionError(f"scaler needs max > min; degenerate columns: {bad}")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "mins", _frozen(mins))
        object.__setattr__(self, "maxs", _frozen(maxs))

    def _index(self, names: Sequence[str]) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.columns)}
        unknown = [n for n in names if n not in lookup]
        if unknown:
            raise PreconditionError(f"columns unknown to the scaler: {unknown}")
        return np.array([lookup[n] for n in names], dtype=np.int64)

    def transform(self, x: np.ndarray, names: Sequence[str] | None = None) -> np.ndarray:
        idx = self._index(names) if names is not None else slice(None)
        lo, hi = self.mins[idx], self.maxs[idx]
        return (np.asarray(x, dtype=np.float64) - lo) / (hi - lo)

    def inverse(self, x: np.ndarray, names: Sequence[str] | None = None) -> np.ndarray:
        idx = self._index(names) if names is not None else slice(None)
        lo, hi = self.mins[idx], self.maxs[idx]
        return np.asarray(x, dtype=np.float64) * (hi - lo) + lo

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "min": [float(v) for v in self.mins],
            "max": [float(v) for v in self.maxs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(tuple(d["columns"]), np.array(d["min"]), np.array(d["max"]))


def fit_scaler(table: FeatureTable) -> ScalerParams:
    if table.n_rows == 0:
        raise PreconditionError("cannot fit a scaler on an empty table")
    if not np.isfinite(table.values).all():
        raise PreconditionError("fit_scaler needs a cleaned table (found NaN/inf)")
    return ScalerParams(table.column_names, table.values.min(axis=0), table.values.max(axis=0))


def apply_scaler(table: FeatureTable, params: ScalerParams, clip: bool = False) -> FeatureTable:
    """Map each column affinely onto [0, 1] using the fit-time range.

    Values outside the fit range extrapolate linearly unless ``clip`` is set.
    """
    scaled = params.transform(table.values, table.column_names)
    if clip:
        scaled = np.clip(scaled, 0.0, 1.0)
    return table.with_values(scaled)


def invert_scaler(table: FeatureTable, params: ScalerParams) -> FeatureTable:
    return table.with_values(params.inverse(table.values, table.column_names))


# --------------------------------------------------------------------------
# labels


def binarize_labels(
    table: FeatureTable,
    normal_name: str = DEFAULT_NORMAL,
    attack_names: Iterable[str] | None = DEFAULT_ATTACKS,
) -> FeatureTable:
    """Attach 0/1 labels: 0 for ``normal_name``, 1 for every attack class.

    ``attack_names=None`` accepts any non-normal label as an attack.
    """
    labels = [str(lbl) for lbl in table.labels]
    if attack_names is not None:
        known = set(attack_names) | {normal_name}
        unseen = sorted(set(labels) - known)
        if unseen:
            raise PreconditionError(f"unseen raw labels: {unseen}")
    binary = np.array([0 if lbl == normal_name else 1 for lbl in labels], dtype=np.int64)
    return FeatureTable(table.column_names, table.values, table.label_name, table.labels, binary)


def require_binary(table: FeatureTable) -> np.ndarray:
    if table.binary is None:
        raise PreconditionError("table has no binary labels; run binarize_labels first")
    return table.binary
