"""Classifier families built from scratch behind a scikit-learn style API.

Every estimator exposes ``predict_score`` (probability-like value in
[0, 1]); ``predict`` is always ``predict_score(X) >= 0.5`` so thresholding
is uniform across families.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import RecordBatch, as_xy, derive_seed, seeded_rng
from .exceptions import (
    ConfigError,
    DimensionError,
    SingleClassError,
    TrainingDivergedError,
    UnsupportedSolverError,
)
from .neighbors import NeighborIndex
from .nn import SGD, DenseNet, sigmoid
from .tree import build_tree

VAR_FLOOR = 1e-9
GBT_LEARNING_RATE = 0.1


def _log_loss(y, p):
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


class BaseClassifier(ClassifierMixin, BaseEstimator):
    """Shared validation and the score-threshold contract."""

    family = ""

    def _validate_fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(np.int64)
        if not np.isin(y, (0, 1)).all():
            raise ConfigError("labels must be 0 or 1")
        if len(np.unique(y)) < 2:
            raise SingleClassError(f"{self.family or type(self).__name__} needs both classes in the training data")
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return X, y

    def _validate_predict(self, X):
        check_is_fitted(self, "classes_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise DimensionError(f"expected {self.n_features_in_} features, got shape {X.shape}")
        if len(X) == 0:
            return X
        return check_array(X, dtype=np.float64)

    def predict_score(self, X) -> np.ndarray:
        X = self._validate_predict(X)
        if len(X) == 0:
            return np.empty(0)
        return self._score(X)

    def predict_proba(self, X) -> np.ndarray:
        s = self.predict_score(X)
        return np.column_stack([1.0 - s, s])

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) >= 0.5).astype(np.int64)


class GaussianNaiveBayes(BaseClassifier):
    family = "nb"

    def __init__(self, var_floor=VAR_FLOOR):
        self.var_floor = var_floor

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        self.theta_ = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
        self.var_ = np.maximum(np.vstack([X[y == c].var(axis=0) for c in (0, 1)]), self.var_floor)
        self.class_prior_ = np.array([np.mean(y == 0), np.mean(y == 1)])
        return self

    def _joint_log_likelihood(self, X):
        out = np.empty((len(X), 2))
        for c in (0, 1):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
            ll -= 0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            out[:, c] = np.log(self.class_prior_[c]) + ll
        return out

    def _score(self, X):
        jll = self._joint_log_likelihood(X)
        return sigmoid(jll[:, 1] - jll[:, 0])


class LogisticRegression(BaseClassifier):
    """L2 logistic regression trained by full-batch gradient descent.

    The step size is ``1/L`` with ``L`` the smoothness constant of the
    objective, so the loss never increases between iterations. The bias is
    not penalised.
    """

    family = "lr"

    def __init__(self, reg_param=0.01, max_iter=100):
        self.reg_param = reg_param
        self.max_iter = max_iter

    def _objective(self, Xb, y, theta):
        p = sigmoid(Xb @ theta)
        return _log_loss(y, p) + 0.5 * self.reg_param * float(theta[:-1] @ theta[:-1]), p

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        if self.max_iter < 0 or self.reg_param < 0:
            raise ConfigError("max_iter and reg_param must be non-negative")
        n = len(X)
        Xb = np.hstack([X, np.ones((n, 1))])
        lip = 0.25 * np.linalg.eigvalsh(Xb.T @ Xb / n)[-1] + self.reg_param
        step = 1.0 / lip
        theta = np.zeros(Xb.shape[1])
        loss, p = self._objective(Xb, y, theta)
        curve = [loss]
        for it in range(self.max_iter):
            grad = Xb.T @ (p - y) / n
            grad[:-1] += self.reg_param * theta[:-1]
            theta = theta - step * grad
            loss, p = self._objective(Xb, y, theta)
            if not math.isfinite(loss):
                raise TrainingDivergedError("logistic loss became non-finite", epoch=it)
            curve.append(loss)
        self.coef_ = theta[:-1].copy()
        self.intercept_ = float(theta[-1])
        self.loss_curve_ = curve
        return self

    def _score(self, X):
        return sigmoid(X @ self.coef_ + self.intercept_)


class LinearSVM(BaseClassifier):
    """Primal hinge loss plus L2, minimised by sub-gradient descent.

    Step ``t`` (0-based) uses ``eta0 / sqrt(t + 1)``. Scores are the sigmoid
    of the signed margin.
    """

    family = "svm"

    def __init__(self, reg_param=0.01, max_iter=100, eta0=1.0):
        self.reg_param = reg_param
        self.max_iter = max_iter
        self.eta0 = eta0

    def _objective(self, X, s, w, b):
        margins = s * (X @ w + b)
        return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * self.reg_param * (w @ w)), margins

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        if self.max_iter < 0 or self.reg_param < 0:
            raise ConfigError("max_iter and reg_param must be non-negative")
        n, d = X.shape
        s = 2.0 * y - 1.0
        w = np.zeros(d)
        b = 0.0
        loss, margins = self._objective(X, s, w, b)
        curve = [loss]
        for t in range(self.max_iter):
            active = margins < 1.0
            gw = self.reg_param * w - (s[active] @ X[active]) / n
            gb = -float(s[active].sum()) / n
            eta = self.eta0 / math.sqrt(t + 1.0)
            w = w - eta * gw
            b = b - eta * gb
            loss, margins = self._objective(X, s, w, b)
            if not math.isfinite(loss):
                raise TrainingDivergedError("hinge loss became non-finite", epoch=t)
            curve.append(loss)
        self.coef_ = w
        self.intercept_ = b
        self.loss_curve_ = curve
        return self

    def decision_function(self, X):
        X = self._validate_predict(X)
        return X @ self.coef_ + self.intercept_

    def _score(self, X):
        return sigmoid(X @ self.coef_ + self.intercept_)


class DecisionTree(BaseClassifier):
    family = "dt"

    def __init__(self, criterion="gini", max_depth=10):
        self.criterion = criterion
        self.max_depth = max_depth

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        if self.criterion not in ("gini", "entropy"):
            raise ConfigError(f"criterion must be 'gini' or 'entropy', not {self.criterion!r}")
        self.tree_ = build_tree(X, y, self.max_depth, self.criterion)
        return self

    def _score(self, X):
        return self.tree_.predict(X)


class RandomForest(BaseClassifier):
    """Bagged CART trees with per-split feature subsampling.

    Tree ``i`` draws its bootstrap sample and feature subsets from seed
    ``seed ^ i`` unless ``tree_seeds`` lists the seeds explicitly.
    ``max_features="sqrt"`` means ``ceil(sqrt(d))``.
    """

    family = "rf"

    def __init__(self, n_estimators=20, max_depth=10, criterion="gini", max_features="sqrt",
                 bootstrap=True, oob_score=False, seed=0, tree_seeds=None):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.criterion = criterion
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.oob_score = oob_score
        self.seed = seed
        self.tree_seeds = tree_seeds

    def _n_features(self, d):
        mf = self.max_features
        if mf is None:
            return d
        if mf == "sqrt":
            return int(math.ceil(math.sqrt(d)))
        if isinstance(mf, (int, np.integer)) and 1 <= mf:
            return min(int(mf), d)
        raise ConfigError(f"max_features must be 'sqrt', None or a positive int, not {mf!r}")

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be positive")
        n, d = X.shape
        mf = self._n_features(d)
        seeds = (list(self.tree_seeds) if self.tree_seeds is not None
                 else [derive_seed(self.seed, i) for i in range(self.n_estimators)])
        if len(seeds) != self.n_estimators:
            raise ConfigError("tree_seeds must have one seed per estimator")
        self.estimators_ = []
        oob_sum = np.zeros(n)
        oob_cnt = np.zeros(n)
        for s in seeds:
            rng = seeded_rng(s)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = build_tree(X[idx], y[idx], self.max_depth, self.criterion, mf, rng)
            self.estimators_.append(tree)
            if self.oob_score and self.bootstrap:
                out = np.ones(n, dtype=bool)
                out[idx] = False
                if out.any():
                    oob_sum[out] += tree.predict(X[out])
                    oob_cnt[out] += 1
        if self.oob_score:
            seen = oob_cnt > 0
            if not seen.any():
                raise ConfigError("no out-of-bag rows; enable bootstrap or add estimators")
            pred = (oob_sum[seen] / oob_cnt[seen]) >= 0.5
            self.oob_score_ = float(np.mean(pred == y[seen]))
        return self

    def _score(self, X):
        return np.mean([t.predict(X) for t in self.estimators_], axis=0)


class GradientBoostedTrees(BaseClassifier):
    """Logistic-loss boosting with regression trees fitted to residuals ``y - p``."""

    family = "gbt"

    def __init__(self, n_estimators=20, max_depth=5, learning_rate=GBT_LEARNING_RATE):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        if self.n_estimators < 0:
            raise ConfigError("n_estimators must be non-negative")
        base = y.mean()
        self.init_ = float(np.log(base / (1.0 - base)))
        F = np.full(len(y), self.init_)
        self.estimators_ = []
        losses = [_log_loss(y, sigmoid(F))]
        for _ in range(self.n_estimators):
            residual = y - sigmoid(F)
            tree = build_tree(X, residual, self.max_depth, "mse")
            F = F + self.learning_rate * tree.predict(X)
            self.estimators_.append(tree)
            losses.append(_log_loss(y, sigmoid(F)))
        self.train_loss_ = losses
        return self

    def decision_function(self, X):
        X = self._validate_predict(X)
        F = np.full(len(X), self.init_)
        for tree in self.estimators_:
            F += self.learning_rate * tree.predict(X)
        return F

    def _score(self, X):
        return sigmoid(self.decision_function(X))


class KNearestNeighbors(BaseClassifier):
    """Positive fraction among the ``k`` nearest training rows; ties go to lower index."""

    family = "knn"

    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        if self.k < 1 or self.k > len(X):
            raise ConfigError(f"k={self.k} must lie in [1, {len(X)}]")
        self.index_ = NeighborIndex(X)
        self.y_ = y
        return self

    def _score(self, X):
        nn, _ = self.index_.kneighbors(X, k=self.k)
        return self.y_[nn].mean(axis=1)


class MLPClassifier(BaseClassifier):
    """One tanh hidden layer and a sigmoid output, trained with mini-batch SGD on cross-entropy."""

    family = "mlp"

    def __init__(self, solver="gd", max_iter=200, hidden_units=32, learning_rate=0.5,
                 batch_size=256, seed=0):
        self.solver = solver
        self.max_iter = max_iter
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        if self.solver in ("l-bfgs", "lbfgs"):
            raise UnsupportedSolverError("only the 'gd' solver is implemented")
        if self.solver != "gd":
            raise ConfigError(f"unknown solver {self.solver!r}; valid: gd")
        X, y = self._validate_fit(X, y)
        if self.max_iter < 0 or self.batch_size < 1:
            raise ConfigError("max_iter must be non-negative and batch_size positive")
        net = DenseNet.build((X.shape[1], self.hidden_units, 1), "tanh", "sigmoid",
                             seed=derive_seed(self.seed, 1))
        rng = seeded_rng(derive_seed(self.seed, 2))
        opt = SGD(net.params(), lr=self.learning_rate)
        n = len(X)
        target = y.astype(np.float64)[:, None]
        curve = []
        for epoch in range(self.max_iter):
            perm = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                idx = perm[start:start + self.batch_size]
                p = net.forward(X[idx])
                total += _log_loss(target[idx, 0], p[:, 0]) * len(idx)
                grads, _ = net.backward((p - target[idx]) / len(idx), pre_activation=True)
                opt.step(grads)
            if not math.isfinite(total):
                raise TrainingDivergedError("MLP loss became non-finite", epoch=epoch)
            curve.append(total / n)
        self.net_ = net
        self.loss_curve_ = curve
        return self

    def _score(self, X):
        return self.net_.forward(X)[:, 0]


MODEL_CLASSES = {
    "nb": GaussianNaiveBayes,
    "lr": LogisticRegression,
    "svm": LinearSVM,
    "dt": DecisionTree,
    "rf": RandomForest,
    "gbt": GradientBoostedTrees,
    "knn": KNearestNeighbors,
    "mlp": MLPClassifier,
}
MODEL_NAMES = tuple(MODEL_CLASSES)
STREAM_DEFAULT_MODELS = ("lr", "knn", "dt", "rf")

# Hyper-parameter keys as written in the published grid, mapped to constructor names.
PARAM_ALIASES = {
    "maxdepth": "max_depth",
    "estimators": "n_estimators",
    "regularization parameter": "reg_param",
    "maximum iterations": "max_iter",
    "criterion": "criterion",
    "solver": "solver",
}

DEFAULT_GRIDS = {
    "nb": {},
    "lr": {"reg_param": [0.1, 0.01, 0.001], "max_iter": [10, 20, 30, 40, 50, 100, 500]},
    "svm": {"reg_param": [0.1, 0.01], "max_iter": [30, 40, 50, 100]},
    "dt": {"criterion": ["gini", "entropy"], "max_depth": [5, 10, 15, 20]},
    "rf": {"max_depth": [5, 10, 15, 20], "n_estimators": [10, 20, 30, 40, 50]},
    "gbt": {"max_depth": [5, 10, 15, 20], "n_estimators": [10, 20, 30, 40, 50]},
    "knn": {},
    "mlp": {"solver": ["gd"], "max_iter": [50, 100, 200, 300]},
}


def canonical_params(hp: dict | None) -> dict:
    return {PARAM_ALIASES.get(k, k): v for k, v in (hp or {}).items()}


def make_model(name: str, hp: dict | None = None, seed: int | None = None) -> BaseClassifier:
    """Unfitted estimator for family ``name``; ``hp`` keys may use the grid spellings."""
    if name not in MODEL_CLASSES:
        raise ConfigError(f"unknown model {name!r}; valid: {', '.join(MODEL_NAMES)}")
    est = MODEL_CLASSES[name]()
    params = canonical_params(hp)
    valid = est.get_params()
    bad = sorted(set(params) - set(valid))
    if bad:
        raise ConfigError(f"model {name!r} has no parameter(s) {bad}; valid: {sorted(valid)}")
    if seed is not None and "seed" in valid and "seed" not in params:
        params["seed"] = seed
    return est.set_params(**params)


def _fit(name, train, hp=None, **kw):
    X, y = as_xy(train)
    params = canonical_params(hp)
    params.update(kw)
    return make_model(name, params).fit(X, y)


def fit_naive_bayes(train):
    return _fit("nb", train)


def fit_logistic_regression(train, hp=None):
    return _fit("lr", train, hp)


def fit_linear_svm(train, hp=None):
    return _fit("svm", train, hp)


def fit_decision_tree(train, hp=None):
    return _fit("dt", train, hp)


def fit_random_forest(train, hp=None, seed=0):
    return _fit("rf", train, hp, seed=seed)


def fit_gbt(train, hp=None):
    return _fit("gbt", train, hp)


def fit_knn(train, k: int = 5):
    return _fit("knn", train, k=k)


def fit_mlp(train, hp=None, seed=0):
    return _fit("mlp", train, hp, seed=seed)


def predict_batch(model: BaseClassifier, batch) -> tuple[np.ndarray, np.ndarray]:
    """``(labels, scores)`` for every record of ``batch``, in order."""
    if isinstance(batch, RecordBatch):
        X = batch.X
    elif isinstance(batch, np.ndarray):
        X = batch
    else:
        X = as_xy(batch)[0]
    scores = model.predict_score(np.asarray(X, dtype=np.float64))
    return (scores >= 0.5).astype(np.int64), scores
