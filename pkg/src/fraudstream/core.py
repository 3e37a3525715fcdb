"""Shared domain types and deterministic numeric helpers.

Everything downstream works on ``(X, y)`` numpy arrays; the record types here
are the boundary representation (CSV rows, stream batches, reports).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionError

MASK64 = (1 << 64) - 1


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values).reshape(-1)
        if arr.size == 0:
            raise DimensionError("feature vector must have positive dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature vector values must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __len__(self):
        return self.dim

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


@dataclass(frozen=True)
class LabeledRecord:
    features: FeatureVector
    label: int

    def __post_init__(self):
        if not isinstance(self.features, FeatureVector):
            object.__setattr__(self, "features", FeatureVector(self.features))
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))


def records_to_arrays(records: Sequence[LabeledRecord]) -> tuple[np.ndarray, np.ndarray]:
    if len(records) == 0:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    dims = {r.features.dim for r in records}
    if len(dims) != 1:
        raise DimensionError(f"records have mixed dimensions {sorted(dims)}")
    X = np.vstack([r.features.values for r in records])
    y = np.array([r.label for r in records], dtype=np.int64)
    return X, y


def arrays_to_records(X, y) -> list[LabeledRecord]:
    X = np.asarray(X, dtype=np.float64)
    return [LabeledRecord(FeatureVector(row), int(lab)) for row, lab in zip(X, y)]


@dataclass(frozen=True)
class RecordBatch:
    """Records collected during one stream interval.

    Arrays are stored read-only so a batch can be shared between the
    producer and consumer threads without copying.
    """

    X: np.ndarray
    y: np.ndarray
    batch_index: int
    arrival_time: float = field(default_factory=lambda: time.monotonic() * 1000.0)

    def __post_init__(self):
        X = _frozen_array(self.X)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
            X.flags.writeable = False
        y = _frozen_array(self.y, dtype=np.int64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"batch has {X.shape[0]} rows but {y.shape[0]} labels")
        if self.batch_index < 0:
            raise ValueError("batch_index must be non-negative")
        if y.size and not np.isin(y, (0, 1)).all():
            raise ValueError("batch labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_records(cls, records: Sequence[LabeledRecord], batch_index: int, **kw) -> "RecordBatch":
        X, y = records_to_arrays(records)
        return cls(X, y, batch_index, **kw)

    @property
    def records(self) -> list[LabeledRecord]:
        return arrays_to_records(self.X, self.y)

    @property
    def dim(self) -> int:
        return int(self.X.shape[1]) if self.X.ndim == 2 else 0

    def __len__(self):
        return int(self.y.shape[0])


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    tn: int
    fp: int

    def __post_init__(self):
        for name in ("tp", "fn", "tn", "fp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp


@dataclass(frozen=True)
class EvalReport:
    sensitivity: float
    specificity: float
    auc: float
    confusion: ConfusionMatrix
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "auc": self.auc,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "tp": self.confusion.tp,
            "fn": self.confusion.fn,
            "tn": self.confusion.tn,
            "fp": self.confusion.fp,
            "degenerate": self.degenerate,
        }


def row_distances(diff) -> np.ndarray:
    """Euclidean norm of each row of ``diff``.

    All distance computations go through here so that exact ties are
    decided by one summation order.
    """
    diff = np.atleast_2d(np.asarray(diff, dtype=np.float64))
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def euclidean_distance(a, b) -> float:
    a = a.values if isinstance(a, FeatureVector) else np.asarray(a, dtype=np.float64)
    b = b.values if isinstance(b, FeatureVector) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(row_distances((a - b).reshape(1, -1))[0])


def seeded_rng(seed: int) -> np.random.Generator:
    """Return the package-wide generator (PCG64) for ``seed``.

    Every randomized operation draws from a handle created here, so this is
    the single place the bit stream is pinned.
    """
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def derive_seed(master: int, index: int) -> int:
    """Per-child seed ``master XOR index`` (trees, folds, windows)."""
    return (int(master) ^ int(index)) & MASK64


def as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    """Accept ``(X, y)``, an object with ``X``/``y`` attributes, or records."""
    if isinstance(data, tuple) and len(data) == 2:
        X, y = data
    elif hasattr(data, "X") and hasattr(data, "y"):
        X, y = data.X, data.y
    else:
        X, y = records_to_arrays(list(data))
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64)


def concat_batches(batches: Iterable[RecordBatch]) -> tuple[np.ndarray, np.ndarray]:
    batches = list(batches)
    return (
        np.concatenate([b.X for b in batches], axis=0),
        np.concatenate([b.y for b in batches], axis=0),
    )
