"""Neighbour-based resampling: SMOTE, SMOTE-Tomek, SMOTE-ENN and ADASYN.

Functions take and return ``(X, y)`` arrays; inputs are never modified.
Synthetic rows are appended after the originals. The resampler classes wrap
the functions behind an imbalanced-learn style ``fit_resample``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .core import seeded_rng
from .exceptions import ConfigError, SingleClassError
from .neighbors import NeighborIndex


@dataclass(frozen=True)
class BalanceConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be positive")
        if self.target_ratio <= 0:
            raise ConfigError("target_ratio must be positive")


def _check(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ConfigError("X must be 2-D with one label per row")
    return X, y


def class_roles(y) -> tuple[int, int]:
    """``(minority_label, majority_label)``; ties make label 1 the minority."""
    y = np.asarray(y)
    n1 = int(np.sum(y == 1))
    n0 = int(np.sum(y == 0))
    if n1 == 0 or n0 == 0:
        raise SingleClassError("resampling needs both classes present")
    return (1, 0) if n1 <= n0 else (0, 1)


def n_to_generate(y, target_ratio: float) -> int:
    minority, majority = class_roles(y)
    n_min = int(np.sum(y == minority))
    n_maj = int(np.sum(y == majority))
    return max(0, int(np.floor(target_ratio * n_maj + 0.5)) - n_min)


def _interpolate(X_min, base, neigh, u):
    return X_min[base] + u[:, None] * (X_min[neigh] - X_min[base])


def smote(X, y, cfg: BalanceConfig = BalanceConfig()):
    X, y = _check(X, y)
    minority, _ = class_roles(y)
    X_min = X[y == minority]
    if len(X_min) <= cfg.k_neighbors:
        raise ConfigError(
            f"minority class has {len(X_min)} records; needs more than k_neighbors={cfg.k_neighbors}"
        )
    n_new = n_to_generate(y, cfg.target_ratio)
    if n_new == 0:
        return X.copy(), y.copy()
    nn, _ = NeighborIndex(X_min).kneighbors(k=cfg.k_neighbors)
    rng = seeded_rng(cfg.seed)
    base = rng.integers(0, len(X_min), size=n_new)
    pick = rng.integers(0, cfg.k_neighbors, size=n_new)
    u = rng.random(n_new)
    synth = _interpolate(X_min, base, nn[base, pick], u)
    return (
        np.vstack([X, synth]),
        np.concatenate([y, np.full(n_new, minority, dtype=np.int64)]),
    )


def tomek_links(X, y) -> list[tuple[int, int]]:
    """All opposite-label pairs ``(i, j)``, ``i < j``, that are mutual nearest neighbours."""
    X, y = _check(X, y)
    class_roles(y)
    nn = NeighborIndex(X).kneighbors(k=1)[0][:, 0]
    links = []
    for i, j in enumerate(nn):
        if i < j and nn[j] == i and y[i] != y[j]:
            links.append((i, int(j)))
    return links


def remove_tomek_links(X, y):
    X, y = _check(X, y)
    links = tomek_links(X, y)
    keep = np.ones(len(y), dtype=bool)
    for i, j in links:
        keep[i] = keep[j] = False
    return X[keep], y[keep]


def smote_tomek(X, y, cfg: BalanceConfig = BalanceConfig()):
    return remove_tomek_links(*smote(X, y, cfg))


def enn_mask(X, y, k: int = 3) -> np.ndarray:
    """Boolean keep-mask: False where a record's label loses its k-NN vote."""
    X, y = _check(X, y)
    if k >= len(y):
        raise ConfigError(f"k={k} must be smaller than the dataset size {len(y)}")
    nn, _ = NeighborIndex(X).kneighbors(k=k)
    pos_votes = y[nn].sum(axis=1)
    neg_votes = k - pos_votes
    # a tied vote has no majority, so nothing is removed
    majority = np.where(pos_votes > neg_votes, 1, np.where(neg_votes > pos_votes, 0, -1))
    return (majority == -1) | (majority == y)


def enn_filter(X, y, k: int = 3):
    X, y = _check(X, y)
    keep = enn_mask(X, y, k)
    return X[keep], y[keep]


def smote_enn(X, y, cfg: BalanceConfig = BalanceConfig(), enn_k: int = 3):
    return enn_filter(*smote(X, y, cfg), k=enn_k)


def largest_remainder(weights, total: int) -> np.ndarray:
    """Integer allocation summing to ``total`` with each share floor/ceil of ``w*total``.

    Leftover units go to the largest fractional parts, lower index first.
    """
    raw = np.asarray(weights, dtype=np.float64) * total
    alloc = np.floor(raw).astype(np.int64)
    short = int(total - alloc.sum())
    if short > 0:
        frac = raw - alloc
        order = np.lexsort((np.arange(len(raw)), -frac))
        alloc[order[:short]] += 1
    return alloc


def adasyn_allocation(X, y, k: int = 5, target_ratio: float = 1.0):
    """Per-minority-point ``(r, w, g)``: hardness ratio, weight and synthetic count."""
    X, y = _check(X, y)
    minority, majority = class_roles(y)
    min_idx = np.flatnonzero(y == minority)
    nn, _ = NeighborIndex(X).kneighbors(k=k)
    r = (y[nn[min_idx]] == majority).sum(axis=1) / k
    if r.sum() == 0:
        warnings.warn("no minority point has majority neighbours; ADASYN falls back to uniform weights")
        w = np.full(len(min_idx), 1.0 / len(min_idx))
    else:
        w = r / r.sum()
    g = largest_remainder(w, n_to_generate(y, target_ratio))
    return r, w, g


def adasyn(X, y, cfg: BalanceConfig = BalanceConfig()):
    X, y = _check(X, y)
    minority, _ = class_roles(y)
    X_min = X[y == minority]
    if len(X_min) <= cfg.k_neighbors:
        raise ConfigError(
            f"minority class has {len(X_min)} records; needs more than k_neighbors={cfg.k_neighbors}"
        )
    _, _, g = adasyn_allocation(X, y, cfg.k_neighbors, cfg.target_ratio)
    n_new = int(g.sum())
    if n_new == 0:
        return X.copy(), y.copy()
    nn, _ = NeighborIndex(X_min).kneighbors(k=cfg.k_neighbors)
    rng = seeded_rng(cfg.seed)
    base = np.repeat(np.arange(len(X_min)), g)
    pick = rng.integers(0, cfg.k_neighbors, size=n_new)
    u = rng.random(n_new)
    synth = _interpolate(X_min, base, nn[base, pick], u)
    return (
        np.vstack([X, synth]),
        np.concatenate([y, np.full(n_new, minority, dtype=np.int64)]),
    )


class BaseResampler(BaseEstimator):
    def fit_resample(self, X, y):
        raise NotImplementedError


class NoResampling(BaseResampler):
    def fit_resample(self, X, y):
        X, y = _check(X, y)
        return X.copy(), y.copy()


class SMOTE(BaseResampler):
    def __init__(self, k_neighbors=5, target_ratio=1.0, seed=0):
        self.k_neighbors = k_neighbors
        self.target_ratio = target_ratio
        self.seed = seed

    def _cfg(self):
        return BalanceConfig(self.k_neighbors, self.target_ratio, self.seed)

    def fit_resample(self, X, y):
        return smote(X, y, self._cfg())


class SMOTETomek(SMOTE):
    def fit_resample(self, X, y):
        return smote_tomek(X, y, self._cfg())


class SMOTEENN(SMOTE):
    def __init__(self, k_neighbors=5, target_ratio=1.0, seed=0, enn_k=3):
        super().__init__(k_neighbors, target_ratio, seed)
        self.enn_k = enn_k

    def fit_resample(self, X, y):
        return smote_enn(X, y, self._cfg(), self.enn_k)


class ADASYN(SMOTE):
    def fit_resample(self, X, y):
        return adasyn(X, y, self._cfg())


BALANCER_NAMES = ("none", "smote", "smote-tomek", "smote-enn", "adasyn", "vgan", "wgan")


def make_balancer(name: str, seed: int = 0, **params):
    """Resampler registered under ``name``; ``none`` gives a pass-through."""
    from .gan import GANOversampler

    factories = {
        "none": NoResampling,
        "smote": SMOTE,
        "smote-tomek": SMOTETomek,
        "smote-enn": SMOTEENN,
        "adasyn": ADASYN,
        "vgan": lambda **kw: GANOversampler(variant="vanilla", **kw),
        "wgan": lambda **kw: GANOversampler(variant="wasserstein", **kw),
    }
    if name not in factories:
        raise ConfigError(f"unknown balancer {name!r}; valid: {', '.join(BALANCER_NAMES)}")
    if name != "none":
        params.setdefault("seed", seed)
    est = factories[name](**params)
    est.name = name
    return est
