"""Binary CART construction on dense float arrays.

Split search is exhaustive over midpoints between consecutive distinct
values. Ties in child impurity go to the lower feature index, then the
lower threshold. Leaves store the mean target, which is the positive
fraction for 0/1 labels and the mean residual for regression.

Rows are sorted per feature once per tree; each split stably partitions the
sorted index lists, so nodes never re-sort.
"""

from __future__ import annotations

import math

import numba
import numpy as np

CRITERIA = {"gini": 0, "entropy": 1, "mse": 2}
_TIE_TOL = 1e-9


@numba.njit(cache=True)
def _entropy(s, n):
    p = s / n
    h = 0.0
    if p > 0.0:
        h -= p * math.log2(p)
    if p < 1.0:
        h -= (1.0 - p) * math.log2(1.0 - p)
    return h


@numba.njit(cache=True)
def _impurity(crit, nl, sl, ssl, n, s, ss):
    nr = n - nl
    sr = s - sl
    if crit == 0:
        return 2.0 * sl * (nl - sl) / nl + 2.0 * sr * (nr - sr) / nr
    if crit == 1:
        return nl * _entropy(sl, nl) + nr * _entropy(sr, nr)
    ssr = ss - ssl
    return (ssl - sl * sl / nl) + (ssr - sr * sr / nr)


@numba.njit(cache=True)
def _node_split(xs, ys, feats, crit):
    """Scan every midpoint of every feature in ``feats``.

    ``xs``/``ys`` hold the node's values and targets sorted per feature.
    Returns ``(feature, threshold, weighted_child_impurity)``; feature is
    -1 when no feature varies. The first (lowest feature, lowest
    threshold) optimum wins ties.
    """
    m = xs.shape[1]
    s = 0.0
    ss = 0.0
    for i in range(m):
        v = ys[0, i]
        s += v
        ss += v * v
    best = np.inf
    best_f = -1
    best_thr = 0.0
    for fi in range(feats.shape[0]):
        f = feats[fi]
        xr = xs[f]
        yr = ys[f]
        sl = 0.0
        ssl = 0.0
        for i in range(m - 1):
            v = yr[i]
            sl += v
            ssl += v * v
            lo = xr[i]
            hi = xr[i + 1]
            if lo < hi:
                imp = _impurity(crit, i + 1.0, sl, ssl, float(m), s, ss)
                # near-equal impurities count as ties so the earlier candidate stays
                if best == np.inf or imp < best - _TIE_TOL * (1.0 + best):
                    best = imp
                    best_f = f
                    thr = (lo + hi) / 2.0
                    if not (lo <= thr and thr < hi):
                        thr = lo
                    best_thr = thr
    return best_f, best_thr, best


@numba.njit(cache=True)
def _partition(order, xs, ys, f, thr, goes_left):
    d, m = order.shape
    n_left = 0
    for i in range(m):
        flag = xs[f, i] <= thr
        goes_left[order[f, i]] = flag
        if flag:
            n_left += 1
    lo = np.empty((d, n_left), dtype=order.dtype)
    lx = np.empty((d, n_left), dtype=xs.dtype)
    ly = np.empty((d, n_left), dtype=ys.dtype)
    ro = np.empty((d, m - n_left), dtype=order.dtype)
    rx = np.empty((d, m - n_left), dtype=xs.dtype)
    ry = np.empty((d, m - n_left), dtype=ys.dtype)
    for j in range(d):
        a = 0
        b = 0
        for i in range(m):
            r = order[j, i]
            if goes_left[r]:
                lo[j, a] = r
                lx[j, a] = xs[j, i]
                ly[j, a] = ys[j, i]
                a += 1
            else:
                ro[j, b] = r
                rx[j, b] = xs[j, i]
                ry[j, b] = ys[j, i]
                b += 1
    return lo, lx, ly, ro, rx, ry


def _sorted_state(X, y):
    order = np.ascontiguousarray(np.argsort(X.T, axis=1, kind="stable"))
    xs = np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))
    ys = np.ascontiguousarray(y[order])
    return order, xs, ys


def _criterion_code(criterion):
    try:
        return CRITERIA[criterion]
    except KeyError:
        raise ValueError(f"unknown criterion {criterion!r}") from None


def best_split(X, y, features, criterion):
    """Best ``(feature, threshold, impurity)`` over ``features`` or ``None``.

    ``impurity`` is the size-weighted sum of child impurities.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if len(y) < 2:
        return None
    _, xs, ys = _sorted_state(X, y)
    feats = np.sort(np.asarray(features, dtype=np.int64))
    f, thr, imp = _node_split(xs, ys, feats, _criterion_code(criterion))
    return None if f < 0 else (int(f), float(thr), float(imp))


class Tree:
    """Flat-array tree: ``feature[i] == -1`` marks a leaf."""

    def __init__(self, feature, threshold, left, right, value, n_samples, depth):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.depth = depth

    @property
    def node_count(self):
        return len(self.feature)

    def apply(self, X):
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            idx = rows[active]
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def predict(self, X):
        return self.value[self.apply(X)]


def build_tree(X, y, max_depth=None, criterion="gini", max_features=None, rng=None) -> Tree:
    """Grow a tree depth-first.

    Nodes stop splitting at ``max_depth``, when pure, when holding fewer
    than two samples, or when no feature varies. ``max_features`` features
    are sampled per split (ascending order) when given.
    """
    crit = _criterion_code(criterion)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = X.shape
    all_features = np.arange(d, dtype=np.int64)
    subsample = max_features is not None and max_features < d
    if subsample and rng is None:
        raise ValueError("feature subsampling needs an rng")
    feature, threshold, left, right, value, n_samples = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()) if len(idx) else 0.0)
        n_samples.append(len(idx))
        return len(feature) - 1

    max_reached = 0
    goes_left = np.zeros(n, dtype=np.bool_)
    stack = [(new_node(np.arange(n)), *_sorted_state(X, y), 0)]
    while stack:
        node, order, xs, ys, depth = stack.pop()
        max_reached = max(max_reached, depth)
        if max_depth is not None and depth >= max_depth:
            continue
        yn = ys[0]
        if len(yn) < 2 or np.all(yn == yn[0]):
            continue
        feats = np.sort(rng.choice(d, size=max_features, replace=False)) if subsample else all_features
        f, thr, _ = _node_split(xs, ys, feats, crit)
        if f < 0:
            continue
        lo, lx, ly, ro, rx, ry = _partition(order, xs, ys, f, thr, goes_left)
        feature[node], threshold[node] = int(f), float(thr)
        lnode = new_node(lo[0])
        rnode = new_node(ro[0])
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is numbered first
        stack.append((rnode, ro, rx, ry, depth + 1))
        stack.append((lnode, lo, lx, ly, depth + 1))
    return Tree(feature, threshold, left, right, value, n_samples, max_reached)
