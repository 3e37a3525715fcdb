"""Shared brute-force oracles and fixtures.

The oracles are deliberately naive O(n^2) loops that share no code with the
package except ``euclidean_distance``, which fixes the distance arithmetic.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import settings

from fraudstream.core import euclidean_distance

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def brute_knn(X, i, k, Q=None):
    """k nearest member indices of row ``i`` (or of query ``Q``); ties to lower index."""
    q = X[i] if Q is None else Q
    d = [(euclidean_distance(q, X[j]), j) for j in range(len(X)) if Q is not None or j != i]
    return [j for _, j in sorted(d)[:k]]


def brute_tomek(X, y):
    nn = [brute_knn(X, i, 1)[0] for i in range(len(X))]
    return sorted((i, j) for i, j in enumerate(nn) if i < j and nn[j] == i and y[i] != y[j])


def brute_enn_removed(X, y, k=3):
    removed = []
    for i in range(len(X)):
        votes = [y[j] for j in brute_knn(X, i, k)]
        pos, neg = sum(votes), k - sum(votes)
        if (pos > neg and y[i] == 0) or (neg > pos and y[i] == 1):
            removed.append(i)
    return removed


def brute_adasyn(X, y, k, target_ratio=1.0):
    minority = 1 if (y == 1).sum() <= (y == 0).sum() else 0
    idx = [i for i in range(len(y)) if y[i] == minority]
    r = np.array([sum(y[j] != minority for j in brute_knn(X, i, k)) / k for i in idx])
    w = r / r.sum() if r.sum() > 0 else np.full(len(idx), 1 / len(idx))
    G = math.floor(target_ratio * (len(y) - len(idx)) + 0.5) - len(idx)
    raw = w * G
    g = np.floor(raw).astype(int)
    rest = G - g.sum()
    # leftover units: largest fractional part first, lower index on ties
    for i in sorted(range(len(idx)), key=lambda i: (-(raw[i] - g[i]), i))[:rest]:
        g[i] += 1
    return r, w, g


def brute_best_split(X, y, criterion="gini"):
    """Exhaustive (feature, threshold) search with its own impurity code."""

    def imp(labels):
        n = len(labels)
        p = sum(labels) / n
        if criterion == "gini":
            return n * (1 - p * p - (1 - p) ** 2)
        h = 0.0
        for q in (p, 1 - p):
            if q > 0:
                h -= q * math.log2(q)
        return n * h

    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f]))
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2
            left = [y[i] for i in range(len(y)) if X[i, f] <= thr]
            right = [y[i] for i in range(len(y)) if X[i, f] > thr]
            score = imp(left) + imp(right)
            if best is None or score < best[2] - 1e-9 * (1 + best[2]):
                best = (f, thr, score)
    return best


def exact_wilcoxon_p(n, w):
    """Two-sided exact p of min(W+, W-) <= w for n untied ranks, by enumerating signs."""
    total = n * (n + 1) // 2
    hits = 0
    for signs in itertools.product((0, 1), repeat=n):
        w_plus = sum(r for r, s in zip(range(1, n + 1), signs) if s)
        hits += min(w_plus, total - w_plus) <= w
    return hits / 2 ** n


def blobs(n=200, d=2, sep=4.0, frac=0.3, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < frac).astype(np.int64)
    y[:2] = [0, 1]
    X = rng.standard_normal((n, d)) + sep * y[:, None]
    return X, y


@pytest.fixture
def small_imbalanced():
    rng = np.random.default_rng(3)
    X = rng.random((60, 3))
    y = np.zeros(60, dtype=np.int64)
    y[:15] = 1
    X[:15] += 0.3
    return X, y


# one verdict line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
