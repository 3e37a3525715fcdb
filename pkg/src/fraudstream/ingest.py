"""CSV loading, cleansing, categorical indexing, normalisation and splitting."""

from __future__ import annotations

import csv
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import arrays_to_records, seeded_rng
from .exceptions import (
    DimensionError,
    EmptyDatasetError,
    IoError,
    ParseError,
    SchemaError,
    StratificationError,
)

_NUMERIC = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
TRUE_ALIASES = frozenset({"1", "1.0", "true", "yes", "fraud", "t", "y"})
FALSE_ALIASES = frozenset({"0", "0.0", "false", "no", "legit", "f", "n"})


@dataclass(frozen=True)
class RawTable:
    column_names: tuple
    rows: tuple
    label_column: str

    def __post_init__(self):
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        width = len(self.column_names)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ParseError(f"expected {width} cells, got {len(row)}", row=i + 1)
        if self.label_column not in self.column_names:
            raise SchemaError(f"label column {self.label_column!r} not in {list(self.column_names)}")

    @property
    def label_index(self) -> int:
        return self.column_names.index(self.label_column)

    def column(self, name):
        j = self.column_names.index(name)
        return [row[j] for row in self.rows]

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class ColumnStats:
    kind: str
    null_fraction: float
    distinct_count: int


@dataclass
class DatasetSchema:
    columns: dict = field(default_factory=dict)
    categories: dict = field(default_factory=dict)
    feature_names: tuple = ()
    minimums: np.ndarray | None = None
    maximums: np.ndarray | None = None


@dataclass
class CleanDataset:
    X: np.ndarray
    y: np.ndarray
    schema: DatasetSchema = field(default_factory=DatasetSchema)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionError("X and y lengths differ")

    @property
    def positive_fraction(self) -> float:
        return float(self.y.mean()) if len(self.y) else 0.0

    @property
    def records(self):
        return arrays_to_records(self.X, self.y)

    def subset(self, idx) -> "CleanDataset":
        return CleanDataset(self.X[idx], self.y[idx], self.schema)

    def __len__(self):
        return int(self.y.shape[0])


def parse_cell(text):
    if text is None or text == "":
        return None
    stripped = text.strip()
    if stripped == "":
        return None
    if _NUMERIC.match(stripped):
        return float(stripped)
    return text


def parse_csv(path, label_column: str = "label") -> RawTable:
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file has no header row") from None
        if label_column not in header:
            raise SchemaError(f"label column {label_column!r} not in header {header}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(header):
                raise ParseError(f"expected {len(header)} cells, got {len(raw)}", row=lineno)
            rows.append(tuple(parse_cell(c) for c in raw))
    return RawTable(tuple(header), tuple(rows), label_column)


def summarize(table: RawTable) -> DatasetSchema:
    """Per-column kind, null fraction and distinct count."""
    n = len(table.rows)
    cols = {}
    for j, name in enumerate(table.column_names):
        values = [row[j] for row in table.rows]
        present = [v for v in values if v is not None]
        kind = "categorical" if any(isinstance(v, str) for v in present) else "numeric"
        cols[name] = ColumnStats(kind, (n - len(present)) / n if n else 0.0, len(set(present)))
    return DatasetSchema(columns=cols)


def _drop_columns(table: RawTable, keep_mask):
    names = tuple(c for c, k in zip(table.column_names, keep_mask) if k)
    rows = tuple(tuple(v for v, k in zip(row, keep_mask) if k) for row in table.rows)
    return RawTable(names, rows, table.label_column)


def _cleanse_pass(table: RawTable, threshold: float) -> RawTable:
    n = len(table.rows)
    label_j = table.label_index
    # null-heavy columns go first
    keep = [
        j == label_j or sum(row[j] is None for row in table.rows) / n <= threshold
        for j in range(len(table.column_names))
    ]
    table = _drop_columns(table, keep)
    seen, rows = set(), []
    for row in table.rows:
        if row not in seen:
            seen.add(row)
            rows.append(row)
    table = RawTable(table.column_names, rows, table.label_column)
    label_j = table.label_index
    keep = [
        j == label_j or len({row[j] for row in table.rows if row[j] is not None}) > 1
        for j in range(len(table.column_names))
    ]
    table = _drop_columns(table, keep)
    rows = [row for row in table.rows if all(v is not None for v in row)]
    return RawTable(table.column_names, rows, table.label_column)


def cleanse(table: RawTable, null_drop_threshold: float = 0.90) -> RawTable:
    """Drop null-heavy columns, duplicates, constant columns, then incomplete rows.

    The pass is repeated until nothing changes, because removing rows can
    turn a column constant or make two rows identical.
    """
    if len(table.rows) == 0:
        raise EmptyDatasetError("table has no rows")
    while True:
        out = _cleanse_pass(table, null_drop_threshold)
        if len(out.rows) == 0:
            raise EmptyDatasetError("cleansing removed every row")
        if out == table:
            return out
        table = out


def category_mapping(values) -> dict:
    counts = Counter(values)
    ordered = sorted(counts, key=lambda v: (-counts[v], str(v)))
    return {v: i for i, v in enumerate(ordered)}


def encode_categoricals(table: RawTable, schema: DatasetSchema | None = None):
    """Replace text columns with frequency-ranked integer codes.

    Returns the encoded table and the schema holding each mapping.
    """
    schema = schema if schema is not None else summarize(table)
    cols = list(zip(*table.rows)) if table.rows else [() for _ in table.column_names]
    categories = dict(schema.categories)
    label_j = table.label_index
    for j, name in enumerate(table.column_names):
        if j == label_j:
            continue
        present = [v for v in cols[j] if v is not None]
        if any(isinstance(v, str) for v in present):
            mapping = category_mapping([str(v) if not isinstance(v, str) else v for v in present])
            categories[name] = mapping
            cols[j] = tuple(
                None if v is None else float(mapping[v if isinstance(v, str) else str(v)])
                for v in cols[j]
            )
    rows = tuple(zip(*cols)) if table.rows else ()
    return RawTable(table.column_names, rows, table.label_column), replace(schema, categories=categories)


def parse_label(value) -> int:
    key = str(int(value)) if isinstance(value, float) and value in (0.0, 1.0) else str(value).strip().lower()
    if key in TRUE_ALIASES:
        return 1
    if key in FALSE_ALIASES:
        return 0
    raise SchemaError(f"label value {value!r} is not 0/1 or a known alias")


def to_dataset(table: RawTable, schema: DatasetSchema | None = None) -> CleanDataset:
    """Numeric feature matrix plus labels from an encoded, cleansed table."""
    label_j = table.label_index
    feats = [j for j in range(len(table.column_names)) if j != label_j]
    names = tuple(table.column_names[j] for j in feats)
    X = np.empty((len(table.rows), len(feats)), dtype=np.float64)
    y = np.empty(len(table.rows), dtype=np.int64)
    for i, row in enumerate(table.rows):
        y[i] = parse_label(row[label_j])
        for c, j in enumerate(feats):
            v = row[j]
            if v is None or isinstance(v, str):
                raise SchemaError(f"row {i + 1} column {table.column_names[j]!r} is not numeric: {v!r}")
            X[i, c] = v
    schema = schema if schema is not None else summarize(table)
    return CleanDataset(X, y, replace(schema, feature_names=names))


def load_dataset(path, label_column="label", null_drop_threshold=0.90) -> CleanDataset:
    raw = parse_csv(path, label_column)
    schema = summarize(raw)
    table, schema = encode_categoricals(cleanse(raw, null_drop_threshold), schema)
    return to_dataset(table, schema)


class MinMaxNormalizer(TransformerMixin, BaseEstimator):
    """Min-max scaling fitted on training rows; transformed values are clamped to [0, 1]."""

    def __init__(self, clip=True):
        self.clip = clip

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.min_ = X.min(axis=0)
        self.max_ = X.max(axis=0)
        self.degenerate_ = self.max_ == self.min_
        if self.degenerate_.any():
            warnings.warn(
                f"constant feature(s) {np.flatnonzero(self.degenerate_).tolist()} map to 0.0"
            )
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "min_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        span = np.where(self.degenerate_, 1.0, self.max_ - self.min_)
        out = (X - self.min_) / span
        out[:, self.degenerate_] = 0.0
        if self.clip:
            np.clip(out, 0.0, 1.0, out=out)
        return out


def fit_normalizer(X, schema: DatasetSchema | None = None):
    """Fit min/max on training rows; returns ``(normalizer, schema)``."""
    norm = MinMaxNormalizer().fit(X)
    schema = schema if schema is not None else DatasetSchema()
    return norm, replace(schema, minimums=norm.min_.copy(), maximums=norm.max_.copy())


def apply_normalizer(schema: DatasetSchema, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if schema.minimums is None:
        raise SchemaError("schema carries no fitted normalisation parameters")
    norm = MinMaxNormalizer()
    norm.min_, norm.max_ = schema.minimums, schema.maximums
    norm.degenerate_ = norm.max_ == norm.min_
    norm.n_features_in_ = len(norm.min_)
    return norm.transform(X)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(ds, train_fraction: float = 0.80, seed: int = 0):
    """Per-class ``round(train_fraction * count)`` rows to train, the rest to test.

    Returns ``(train_idx, test_idx)`` sorted ascending. Every class keeps at
    least one record on each side.
    """
    y = np.asarray(ds.y if hasattr(ds, "y") else ds, dtype=np.int64)
    if not 0.0 < train_fraction < 1.0:
        raise StratificationError("train_fraction must lie strictly between 0 and 1")
    rng = seeded_rng(seed)
    train, test = [], []
    labels = np.unique(y)
    if len(labels) < 2:
        raise StratificationError("both classes must be present")
    for label in labels:
        idx = np.flatnonzero(y == label)
        if len(idx) < 2:
            raise StratificationError(f"class {label} has fewer than 2 records")
        n_train = min(max(round_half_up(train_fraction * len(idx)), 1), len(idx) - 1)
        perm = rng.permutation(idx)
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
