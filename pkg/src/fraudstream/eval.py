"""Metrics, stratified k-fold cross-validation, grid search and significance tests.

AUC here is the balanced accuracy ``(sensitivity + specificity) / 2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import stdtr
from scipy.stats import norm, rankdata
from sklearn.base import clone
from sklearn.model_selection import ParameterGrid

from .core import ConfusionMatrix, EvalReport, as_xy, derive_seed, seeded_rng
from .exceptions import (
    ConfigError,
    DegenerateTestError,
    DimensionError,
    FraudStreamError,
    StratificationError,
)
from .models import canonical_params, make_model

ALPHA = 0.05


def confusion(labels_true, labels_pred) -> ConfusionMatrix:
    t = np.asarray(labels_true, dtype=np.int64).ravel()
    p = np.asarray(labels_pred, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise DimensionError(f"{len(t)} true labels but {len(p)} predictions")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fn=int(np.sum((t == 1) & (p != 1))),
        tn=int(np.sum((t != 1) & (p != 1))),
        fp=int(np.sum((t != 1) & (p == 1))),
    )


def eval_report(cm: ConfusionMatrix) -> EvalReport:
    """Rates from counts; a rate with an empty denominator is 0 and flagged degenerate."""
    pos = cm.tp + cm.fn
    neg = cm.tn + cm.fp
    sens = cm.tp / pos if pos else 0.0
    spec = cm.tn / neg if neg else 0.0
    return EvalReport(sens, spec, (sens + spec) / 2.0, cm, degenerate=not (pos and neg))


def evaluate(labels_true, labels_pred) -> EvalReport:
    return eval_report(confusion(labels_true, labels_pred))


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple

    def train_test(self, i):
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, test

    def __iter__(self):
        return (self.train_test(i) for i in range(self.k))

    def __len__(self):
        return self.k


def stratified_kfold(ds, k: int = 10, seed: int = 0) -> FoldPlan:
    """Shuffle each class, then deal its rows to folds round-robin.

    The dealing position carries over from one class to the next, so total
    fold sizes also differ by at most one.
    """
    y = np.asarray(ds.y if hasattr(ds, "y") else ds, dtype=np.int64)
    if k < 2:
        raise StratificationError("k must be at least 2")
    rng = seeded_rng(seed)
    buckets = [[] for _ in range(k)]
    pos = 0
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        if len(idx) < k:
            raise StratificationError(f"class {label} has {len(idx)} records, fewer than k={k}")
        for i in rng.permutation(idx):
            buckets[pos % k].append(i)
            pos += 1
    if len(np.unique(y)) < 2:
        raise StratificationError("both classes must be present")
    return FoldPlan(k, tuple(np.sort(np.asarray(b, dtype=np.int64)) for b in buckets))


@dataclass
class CvResult:
    family: str
    params: dict
    folds: list
    balancer: str = "none"
    candidates: list = field(default_factory=list)

    @property
    def mean_auc(self) -> float:
        return float(np.mean([r.auc for r in self.folds]))

    @property
    def mean_sensitivity(self) -> float:
        return float(np.mean([r.sensitivity for r in self.folds]))

    @property
    def mean_specificity(self) -> float:
        return float(np.mean([r.specificity for r in self.folds]))

    def fold_values(self, metric: str) -> list:
        return [getattr(r, metric) for r in self.folds]

    def as_dict(self) -> dict:
        return {
            "model": self.family,
            "balancer": self.balancer,
            "params": _jsonable(self.params),
            "folds": {m: self.fold_values(m) for m in ("auc", "sensitivity", "specificity")},
            "mean_auc": self.mean_auc,
            "mean_sensitivity": self.mean_sensitivity,
            "mean_specificity": self.mean_specificity,
        }


def _jsonable(params):
    return {k: (v.item() if isinstance(v, np.generic) else v) for k, v in sorted(params.items())}


def _with_seed(est, seed):
    if est is not None and "seed" in est.get_params():
        est = clone(est).set_params(seed=seed)
    return est


def _annotate(err: Exception, fold: int):
    err.fold = fold
    if err.args and isinstance(err.args[0], str):
        err.args = (f"fold {fold}: {err.args[0]}",) + err.args[1:]
    return err


def _balancer_name(balancer):
    if balancer is None:
        return "none"
    return getattr(balancer, "name", type(balancer).__name__)


def cross_validate(ds, family, hp=None, balancer=None, k: int = 10, seed: int = 0) -> CvResult:
    """k-fold estimate; only the training folds ever pass through ``balancer``.

    ``family`` is a model name or an unfitted estimator (cloned per fold).
    Errors raised while fitting carry the fold index in ``err.fold`` and in
    the message.
    """
    X, y = as_xy(ds)
    plan = stratified_kfold(y, k, seed)
    params = canonical_params(hp)
    reports = []
    for i, (train, test) in enumerate(plan):
        try:
            if isinstance(family, str):
                model = make_model(family, params, seed=seed)
            else:
                model = clone(family).set_params(**params)
            Xtr, ytr = X[train], y[train]
            bal = _with_seed(balancer, derive_seed(seed, i))
            if bal is not None:
                Xtr, ytr = bal.fit_resample(Xtr, ytr)
            model.fit(Xtr, ytr)
        except FraudStreamError as err:
            raise _annotate(err, i)
        reports.append(evaluate(y[test], model.predict(X[test])))
    name = family if isinstance(family, str) else type(family).__name__
    return CvResult(name, params, reports, _balancer_name(balancer))


def _simplicity_key(params):
    # lower sorts first: fewer estimators, shallower, fewer iterations, stronger regularisation
    depth = params.get("max_depth")
    return (
        params.get("n_estimators", 0),
        math.inf if depth is None and "max_depth" in params else (depth or 0),
        params.get("max_iter", 0),
        -params.get("reg_param", 0.0),
    )


def grid_search(ds, family, grid, balancer=None, k: int = 10, seed: int = 0) -> CvResult:
    """Cross-validate every grid point and return the best by mean AUC.

    ``grid`` is a list of parameter dicts or a dict of value lists. Equal
    AUCs go to the simpler model; remaining ties keep grid order.
    """
    points = list(ParameterGrid(grid)) if isinstance(grid, dict) else [dict(p) for p in grid]
    if not points:
        raise ConfigError("grid must contain at least one point")
    results = [cross_validate(ds, family, p, balancer, k, seed) for p in points]
    order = sorted(range(len(results)),
                   key=lambda i: (-results[i].mean_auc, _simplicity_key(results[i].params), i))
    best = results[order[0]]
    best.candidates = results
    return best


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    df: int | None = None
    degenerate: bool = False
    z: float | None = None

    def reject(self, alpha: float = ALPHA) -> bool:
        return self.p_value < alpha

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "df": self.df,
                "degenerate": self.degenerate}


def student_t_two_tailed(t: float, df: int) -> float:
    return float(min(1.0, 2.0 * stdtr(df, -abs(t))))


def two_sample_t_test(a, b, paired: bool = False) -> TestResult:
    """Pooled-variance two-tailed t-test; ``paired=True`` tests the differences instead."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if paired:
        if a.shape != b.shape:
            raise DimensionError("paired test needs equal-length samples")
        if len(a) < 2:
            raise ConfigError("paired test needs at least 2 pairs")
        d = a - b
        df = len(d) - 1
        mean_diff = d.mean()
        se = d.std(ddof=1) / math.sqrt(len(d))
    else:
        if len(a) < 2 or len(b) < 2:
            raise ConfigError("each sample needs at least 2 values")
        df = len(a) + len(b) - 2
        pooled = ((len(a) - 1) * a.var(ddof=1) + (len(b) - 1) * b.var(ddof=1)) / df
        mean_diff = a.mean() - b.mean()
        se = math.sqrt(pooled * (1.0 / len(a) + 1.0 / len(b)))
    if se == 0.0:
        if mean_diff == 0.0:
            return TestResult(0.0, 1.0, df, degenerate=True)
        raise DegenerateTestError("zero variance with unequal means: t is unbounded")
    t = float(mean_diff / se)
    return TestResult(t, student_t_two_tailed(t, df), df)


def wilcoxon_signed_rank(a, b) -> TestResult:
    """Two-tailed signed-rank test, normal approximation with tie and continuity corrections.

    The statistic is ``min(W+, W-)`` over the non-zero differences.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError("Wilcoxon test needs equal-length samples")
    if len(a) < 10:
        raise ConfigError("the normal approximation needs at least 10 pairs")
    d = a - b
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        return TestResult(0.0, 1.0, degenerate=True)
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    mean = n * (n + 1) / 4.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(counts ** 3 - counts)) / 48.0
    if var <= 0.0:
        return TestResult(w, 1.0, degenerate=True)
    diff = w - mean
    # continuity correction moves toward zero but never past it
    diff = math.copysign(max(abs(diff) - 0.5, 0.0), diff)
    z = diff / math.sqrt(var)
    return TestResult(w, float(min(1.0, 2.0 * norm.sf(abs(z)))), z=z)


def write_jsonl(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row.as_dict() if hasattr(row, "as_dict") else row, sort_keys=True))
            fh.write("\n")


def read_jsonl(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
