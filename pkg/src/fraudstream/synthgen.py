"""Deterministic synthetic ATM-style transactions.

Each record has a hidden channel component ``c`` (probability 1/2). With
shift ``delta`` and label ``y`` the feature roles are, in column order:

    0, 1   N(0, 1) + delta * y
    2      channel indicator, N(-2 or +2, 0.5) by ``c``
    3      N(0, 1) + delta * y * (+1 if c else -1)   (interaction with column 2)
    4      N(0, 1) + 0.5 * delta * y
    5      0.7 * column 0 + N(0, 0.7)
    6+     N(0, 1) noise

``delta = 0`` makes both classes identically distributed. The finished
matrix is min-max scaled to [0, 1] column-wise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import RecordBatch, derive_seed, seeded_rng
from .exceptions import ConfigError
from .ingest import CleanDataset, DatasetSchema, MinMaxNormalizer, round_half_up

BATCH_FILE_PATTERN = "batch_{:06d}.csv"


@dataclass(frozen=True)
class GenSpec:
    n_records: int = 100_000
    n_features: int = 10
    fraud_fraction: float = 0.122
    separation: float = 1.5
    min_positives_per_batch: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.fraud_fraction < 0.5:
            raise ConfigError("fraud_fraction must lie strictly between 0 and 0.5")
        if self.separation < 0:
            raise ConfigError("separation must be non-negative")
        if self.n_records < 2 or self.n_features < 1:
            raise ConfigError("need at least 2 records and 1 feature")
        if self.min_positives_per_batch < 0:
            raise ConfigError("min_positives_per_batch must be non-negative")

    @property
    def n_positive(self) -> int:
        return round_half_up(self.fraud_fraction * self.n_records)


def feature_names(n_features: int) -> tuple:
    return tuple(f"f{j}" for j in range(n_features))


def _features(y, d, delta, rng):
    n = len(y)
    c = rng.random(n) < 0.5
    sign = np.where(c, 1.0, -1.0)
    Z = rng.standard_normal((n, max(d, 6)))
    X = np.empty((n, max(d, 6)))
    X[:, 0] = Z[:, 0] + delta * y
    X[:, 1] = Z[:, 1] + delta * y
    X[:, 2] = 2.0 * sign + 0.5 * Z[:, 2]
    X[:, 3] = Z[:, 3] + delta * y * sign
    X[:, 4] = Z[:, 4] + 0.5 * delta * y
    X[:, 5] = 0.7 * X[:, 0] + 0.7 * Z[:, 5]
    X[:, 6:] = Z[:, 6:]
    return X[:, :d]


def generate_dataset(spec: GenSpec = GenSpec()) -> CleanDataset:
    """Exactly ``round(fraud_fraction * n)`` positives placed at random rows."""
    rng = seeded_rng(spec.seed)
    y = np.zeros(spec.n_records, dtype=np.int64)
    y[rng.permutation(spec.n_records)[: spec.n_positive]] = 1
    X = _features(y.astype(np.float64), spec.n_features, spec.separation, rng)
    norm = MinMaxNormalizer()
    with np.errstate(all="ignore"):
        X = norm.fit_transform(X)
    schema = DatasetSchema(feature_names=feature_names(spec.n_features),
                           minimums=norm.min_.copy(), maximums=norm.max_.copy())
    return CleanDataset(X, y, schema)


def repair_batches(y, bounds, min_pos):
    """Permutation moving positives so every chunk in ``bounds`` holds ``min_pos`` of them.

    Each swap trades a negative of a short chunk for a positive of the chunk
    with the largest surplus (lowest index on ties), so the record multiset
    is unchanged.
    """
    y = np.asarray(y)
    perm = np.arange(len(y))
    counts = np.array([int(y[a:b].sum()) for a, b in bounds])
    if counts.sum() < min_pos * len(bounds):
        raise ConfigError(
            f"{counts.sum()} positives cannot give {len(bounds)} batches {min_pos} each"
        )
    for i, (a, b) in enumerate(bounds):
        if b - a < min_pos:
            raise ConfigError(f"batch {i} has only {b - a} records")
        while counts[i] < min_pos:
            donor = int(np.argmax(counts - min_pos))
            da, db = bounds[donor]
            src = next(p for p in range(da, db) if y[perm[p]] == 1)
            dst = next(p for p in range(a, b) if y[perm[p]] == 0)
            perm[src], perm[dst] = perm[dst], perm[src]
            counts[donor] -= 1
            counts[i] += 1
    return perm


def generate_batches(spec: GenSpec = GenSpec(), batch_size: int = 1000) -> list[RecordBatch]:
    """Shuffle the dataset, cut it into ``batch_size`` chunks, then repair positives.

    A trailing partial chunk becomes a smaller last batch.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be positive")
    ds = generate_dataset(spec)
    order = seeded_rng(derive_seed(spec.seed, 1)).permutation(len(ds))
    X, y = ds.X[order], ds.y[order]
    bounds = [(a, min(a + batch_size, len(y))) for a in range(0, len(y), batch_size)]
    perm = repair_batches(y, bounds, spec.min_positives_per_batch)
    X, y = X[perm], y[perm]
    return [RecordBatch(X[a:b], y[a:b], i, arrival_time=float(i)) for i, (a, b) in enumerate(bounds)]


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(path, X, y, names=None) -> None:
    X = np.asarray(X)
    names = names or feature_names(X.shape[1])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"])
        for row, label in zip(X, y):
            w.writerow([*map(_fmt, row), int(label)])


def write_dataset(ds: CleanDataset, path) -> None:
    write_csv(path, ds.X, ds.y, ds.schema.feature_names or None)


def write_batches(batches, directory) -> list[Path]:
    """One ``batch_NNNNNN.csv`` per batch, numbered from 1."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, b in enumerate(batches, start=1):
        p = directory / BATCH_FILE_PATTERN.format(i)
        write_csv(p, b.X, b.y)
        paths.append(p)
    return paths
