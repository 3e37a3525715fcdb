import numpy as np
import pytest
from conftest import blobs, brute_best_split, brute_knn
from hypothesis import given, settings
from hypothesis import strategies as st

from fraudstream.core import RecordBatch
from fraudstream.eval import evaluate
from fraudstream.exceptions import (
    ConfigError,
    DimensionError,
    SingleClassError,
    UnsupportedSolverError,
)
from fraudstream.models import (
    MODEL_NAMES,
    DecisionTree,
    GradientBoostedTrees,
    KNearestNeighbors,
    LinearSVM,
    LogisticRegression,
    MLPClassifier,
    RandomForest,
    fit_decision_tree,
    fit_gbt,
    fit_knn,
    fit_linear_svm,
    fit_logistic_regression,
    fit_mlp,
    fit_naive_bayes,
    fit_random_forest,
    make_model,
    predict_batch,
)
from fraudstream.tree import best_split

XOR_X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
XOR_Y = np.array([0, 1, 1, 0])


def _acc(model, X, y):
    return float(np.mean(model.predict(X) == y))


# --- naive Bayes -----------------------------------------------------------

def test_nb_separable():
    X, y = blobs(200, sep=10.0)
    assert _acc(fit_naive_bayes((X, y)), X, y) == 1.0


def test_nb_mirror_symmetry():
    rng = np.random.default_rng(0)
    A = rng.random((30, 2)) * 0.4
    X = np.vstack([A, 1.0 - A])
    y = np.array([0] * 30 + [1] * 30)
    m = fit_naive_bayes((X, y))
    Q = rng.random((20, 2))
    np.testing.assert_allclose(m.predict_score(1.0 - Q), 1.0 - m.predict_score(Q), atol=1e-12)


def test_nb_means_match_column_means():
    X, y = blobs(200, d=3, seed=4)
    m = fit_naive_bayes((X, y))
    for c in (0, 1):
        rows = [X[i] for i in range(len(y)) if y[i] == c]
        oracle = [sum(r[j] for r in rows) / len(rows) for j in range(3)]
        np.testing.assert_allclose(m.theta_[c], oracle, rtol=1e-12)


def test_single_class_rejected():
    with pytest.raises(SingleClassError):
        fit_naive_bayes((np.zeros((4, 1)), np.zeros(4)))


# --- logistic regression and SVM ------------------------------------------

def test_lr_separable_1d():
    X = np.linspace(0, 1, 40)[:, None]
    y = (X[:, 0] > 0.5).astype(int)
    m = fit_logistic_regression((X, y), {"regularization parameter": 0.001, "maximum iterations": 500})
    assert _acc(m, X, y) == 1.0


def test_lr_zero_iterations():
    X, y = blobs(50)
    m = fit_logistic_regression((X, y), {"max_iter": 0})
    assert np.all(m.coef_ == 0) and np.all(m.predict_score(X) == 0.5)


def test_lr_loss_non_increasing():
    X, y = blobs(30, d=3, sep=1.0, seed=2)
    curve = LogisticRegression(reg_param=0.01, max_iter=200).fit(X, y).loss_curve_
    assert all(b <= a + 1e-15 for a, b in zip(curve, curve[1:]))


def test_svm_separable_zero_iter_and_trace():
    X = np.linspace(-1, 1, 40)[:, None]
    y = (X[:, 0] > 0).astype(int)
    assert _acc(fit_linear_svm((X, y), {"reg_param": 0.01, "max_iter": 100}), X, y) == 1.0
    m0 = fit_linear_svm((X, y), {"max_iter": 0})
    assert np.all(m0.coef_ == 0) and np.all(m0.predict_score(X) == 0.5)
    Xb, yb = blobs(120, d=2, sep=1.5, seed=3)
    curve = np.array(LinearSVM(reg_param=0.01, max_iter=100).fit(Xb, yb).loss_curve_)
    means = [curve[i:i + 10].mean() for i in range(0, 100, 10)]
    assert all(b <= a + 1e-12 for a, b in zip(means, means[1:]))


# --- trees ---------------------------------------------------------------

@pytest.mark.parametrize("criterion", ["gini", "entropy"])
def test_dt_xor(criterion):
    m = fit_decision_tree((XOR_X, XOR_Y), {"criterion": criterion, "maxdepth": 2})
    assert _acc(m, XOR_X, XOR_Y) == 1.0


def test_dt_depth_zero_is_prior():
    X, y = blobs(40, frac=0.3, seed=1)
    m = DecisionTree(max_depth=0).fit(X, y)
    assert np.allclose(m.predict_score(X), y.mean())
    assert np.all(m.predict(X) == 0)


@pytest.mark.parametrize("criterion", ["gini", "entropy"])
@pytest.mark.parametrize("seed", range(6))
def test_root_split_matches_exhaustive_search(seed, criterion):
    rng = np.random.default_rng(seed)
    # coarse values give repeated thresholds and impurity ties
    X = rng.integers(0, 5, size=(20, 3)).astype(float)
    y = (rng.random(20) < 0.4).astype(int)
    y[:2] = [0, 1]
    f, thr, imp = best_split(X, y, range(3), criterion)
    of, othr, oimp = brute_best_split(X, y, criterion)
    assert (f, thr) == (of, othr)
    assert imp == pytest.approx(oimp, abs=1e-9)
    tree = DecisionTree(criterion=criterion, max_depth=1).fit(X, y).tree_
    assert (tree.feature[0], tree.threshold[0]) == (of, othr)


def test_rf_reduces_to_tree():
    X, y = blobs(150, d=4, sep=1.0, seed=5)
    dt = DecisionTree(max_depth=6).fit(X, y)
    rf = RandomForest(n_estimators=1, max_depth=6, max_features=None, bootstrap=False).fit(X, y)
    Q = np.random.default_rng(1).normal(size=(100, 4))
    assert np.array_equal(rf.predict_score(Q), dt.predict_score(Q))


def test_rf_duplicate_seeds_equal_single_tree():
    X, y = blobs(150, d=4, sep=1.0, seed=6)
    one = RandomForest(n_estimators=1, tree_seeds=[17]).fit(X, y)
    many = RandomForest(n_estimators=5, tree_seeds=[17] * 5).fit(X, y)
    np.testing.assert_allclose(many.predict_score(X), one.predict_score(X), atol=1e-15)


def test_rf_oob_tracks_holdout():
    X, y = blobs(400, d=4, sep=1.2, seed=8)
    tr, te = np.arange(200), np.arange(200, 400)
    rf = fit_random_forest((X[tr], y[tr]), {"estimators": 50, "maxdepth": 5}, seed=3)
    rf.set_params(oob_score=True).fit(X[tr], y[tr])
    assert abs(rf.oob_score_ - _acc(rf, X[te], y[te])) <= 0.05


def test_rf_variance_shrinks_with_more_trees():
    X, y = blobs(200, d=4, sep=1.0, seed=9)
    Q = np.random.default_rng(2).normal(size=(50, 4)) + 0.5
    spread = {}
    for n in (5, 50):
        scores = np.array([RandomForest(n_estimators=n, max_depth=8, seed=s).fit(X, y).predict_score(Q)
                           for s in range(20)])
        spread[n] = scores.var(axis=0).mean()
    assert spread[50] < spread[5]


def test_gbt_prior_only():
    X, y = blobs(40, frac=0.25, seed=1)
    m = GradientBoostedTrees(n_estimators=0).fit(X, y)
    assert np.allclose(m.predict_score(X), y.mean())


def test_gbt_stump_splits_at_step():
    X = np.arange(10, dtype=float)[:, None]
    y = (X[:, 0] >= 6).astype(int)
    m = fit_gbt((X, y), {"estimators": 1, "maxdepth": 1})
    t = m.estimators_[0]
    assert t.feature[0] == 0 and t.threshold[0] == 5.5


def test_gbt_training_loss_decreases():
    X, y = blobs(150, d=3, sep=1.0, seed=11)
    loss = fit_gbt((X, y), {"estimators": 15, "maxdepth": 3}).train_loss_
    assert all(b < a for a, b in zip(loss, loss[1:]))


# --- KNN and MLP ---------------------------------------------------------

def test_knn_exact_match_and_full_k():
    X, y = blobs(30, seed=12)
    m1 = fit_knn((X, y), k=1)
    assert np.array_equal(m1.predict(X), y)
    mn = fit_knn((X, y), k=30)
    assert np.allclose(mn.predict_score(np.random.default_rng(0).normal(size=(5, 2))), y.mean())
    with pytest.raises(ConfigError):
        fit_knn((X, y), k=31)


def test_knn_matches_brute_force():
    rng = np.random.default_rng(13)
    X = rng.integers(0, 4, size=(30, 2)).astype(float)
    y = (rng.random(30) < 0.4).astype(int)
    y[:2] = [0, 1]
    Q = rng.integers(0, 4, size=(15, 2)).astype(float)
    scores = KNearestNeighbors(k=5).fit(X, y).predict_score(Q)
    oracle = [sum(y[j] for j in brute_knn(X, None, 5, Q=q)) / 5 for q in Q]
    assert scores.tolist() == oracle


def test_mlp_learns_xor_for_some_seed():
    X = np.repeat(XOR_X, 10, axis=0)
    y = np.repeat(XOR_Y, 10)
    accs = [_acc(fit_mlp((X, y), {"maximum iterations": 300}, seed=s), X, y) for s in range(5)]
    assert max(accs) == 1.0


def test_mlp_zero_epochs_and_solver_errors():
    X, y = blobs(30)
    s = fit_mlp((X, y), {"max_iter": 0}).predict_score(X)
    assert np.all((s > 0) & (s < 1))
    with pytest.raises(UnsupportedSolverError):
        fit_mlp((X, y), {"solver": "l-bfgs"})
    with pytest.raises(ConfigError):
        MLPClassifier(solver="adam").fit(X, y)


# --- shared contracts ----------------------------------------------------

def _quick(name, seed=0):
    hp = {"rf": {"n_estimators": 5}, "gbt": {"n_estimators": 5}, "mlp": {"max_iter": 20}}.get(name)
    return make_model(name, hp, seed=seed)


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_threshold_and_determinism(name):
    X, y = blobs(120, d=3, sep=1.0, seed=14)
    a, b = _quick(name).fit(X, y), _quick(name).fit(X, y)
    s = a.predict_score(X)
    assert np.all((s >= 0) & (s <= 1))
    assert np.array_equal(a.predict(X), (s >= 0.5).astype(int))
    assert np.array_equal(s, b.predict_score(X))
    with pytest.raises(DimensionError):
        a.predict(np.zeros((2, 4)))


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_every_family_beats_chance(name):
    X, y = blobs(400, d=3, sep=1.5, frac=0.4, seed=15)
    # defaults here: a handful of 0.1-sized boosting steps cannot leave the prior
    m = make_model(name, {"rf": {"n_estimators": 5}}.get(name), seed=0).fit(X[:300], y[:300])
    assert evaluate(y[300:], m.predict(X[300:])).auc > 0.5


@settings(max_examples=15)
@given(st.integers(0, 10**6))
def test_tree_families_monotone_invariant(seed):
    X, y = blobs(80, d=2, sep=1.0, seed=seed % 1000)
    Z = np.column_stack([np.exp(X[:, 0]), X[:, 1] ** 3 + 2 * X[:, 1]])
    # bootstrap off: out-of-bag rows can sit strictly inside a gap, where midpoints are not invariant
    models = {"dt": lambda: _quick("dt", seed), "gbt": lambda: _quick("gbt", seed),
              "rf": lambda: make_model("rf", {"n_estimators": 5, "bootstrap": False}, seed=seed)}
    for make in models.values():
        a = make().fit(X, y).predict(X)
        b = make().fit(Z, y).predict(Z)
        assert np.array_equal(a, b)


def test_predict_batch_contract():
    X, y = blobs(60, seed=16)
    m = fit_naive_bayes((X, y))
    labels, scores = predict_batch(m, RecordBatch(X[:10], y[:10], 0))
    loop = [m.predict_score(X[i:i + 1])[0] for i in range(10)]
    assert np.allclose(scores, loop) and np.array_equal(labels, scores >= 0.5)
    assert len(predict_batch(m, np.empty((0, 2)))[0]) == 0


def test_make_model_errors_and_aliases():
    with pytest.raises(ConfigError, match="gbt"):
        make_model("xgb")
    with pytest.raises(ConfigError):
        make_model("dt", {"estimators": 3})
    assert make_model("rf", {"estimators": 7, "maxdepth": 3}).get_params()["n_estimators"] == 7
