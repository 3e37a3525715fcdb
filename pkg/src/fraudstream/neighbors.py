"""Exact k-nearest-neighbour search with deterministic tie-breaking.

A KD-tree proposes candidates; distances are then recomputed directly and
ordered by ``(distance, index)`` so results do not depend on tree layout.
When ties could extend past the candidate list, a radius query collects the
full tie set.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .core import row_distances
from .exceptions import ConfigError, DimensionError

_EXTRA = 1
# candidate distances come from a different summation order; treat near-equal as tied
_TIE_RTOL = 1e-12


class NeighborIndex:
    """Immutable exact Euclidean k-NN index over a point set."""

    def __init__(self, points):
        points = np.array(points, dtype=np.float64, copy=True)
        if points.ndim != 2:
            raise DimensionError("points must be a 2-D array")
        points.flags.writeable = False
        self.points = points
        self._tree = cKDTree(points, leafsize=64) if len(points) else None

    def __len__(self):
        return int(self.points.shape[0])

    def _exact(self, q, cand):
        return row_distances(self.points[cand] - q)

    def _query_one(self, q, k, exclude):
        n = len(self)
        avail = n - (1 if exclude is not None else 0)
        m = min(n, k + _EXTRA + (1 if exclude is not None else 0))
        _, cand = self._tree.query(q, k=m)
        cand = np.atleast_1d(cand)
        cand = cand[cand < n]
        d = self._exact(q, cand)
        if exclude is not None:
            keep = cand != exclude
            cand, d = cand[keep], d[keep]
        order = np.lexsort((cand, d))
        cand, d = cand[order], d[order]
        if len(cand) < avail:
            # the last proposed distance ties the k-th: ties may continue past the list
            if len(cand) <= k or d[k - 1] >= d[-1] * (1 - _TIE_RTOL):
                radius = d[min(k, len(d)) - 1]
                cand = np.array(self._tree.query_ball_point(q, radius * (1 + 1e-9) + 1e-300), dtype=np.int64)
                d = self._exact(q, cand)
                if exclude is not None:
                    keep = cand != exclude
                    cand, d = cand[keep], d[keep]
                order = np.lexsort((cand, d))
                cand, d = cand[order], d[order]
        return cand[:k], d[:k]

    def query(self, x, k, exclude=None):
        """Indices and distances of the ``k`` points nearest ``x``.

        ``exclude`` drops one member index (the query point itself).
        """
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.points.shape[1]:
            raise DimensionError(f"query has dim {x.shape[0]}, index has {self.points.shape[1]}")
        avail = len(self) - (1 if exclude is not None else 0)
        if k < 1 or k > avail:
            raise ConfigError(f"k={k} must lie in [1, {avail}]")
        return self._query_one(x, k, exclude)

    def kneighbors(self, X=None, k=5):
        """Neighbour matrix ``(n_queries, k)`` plus distances.

        With ``X=None`` every member is queried against the others,
        excluding itself.
        """
        if X is None:
            queries, self_query = self.points, True
        else:
            queries = np.asarray(X, dtype=np.float64)
            self_query = False
            if queries.ndim != 2 or queries.shape[1] != self.points.shape[1]:
                raise DimensionError("query matrix dimension does not match index")
        avail = len(self) - (1 if self_query else 0)
        if k < 1 or k > avail:
            raise ConfigError(f"k={k} must lie in [1, {avail}]")
        idx = np.empty((len(queries), k), dtype=np.int64)
        dist = np.empty((len(queries), k), dtype=np.float64)
        if len(queries) == 0:
            return idx, dist
        n = len(self)
        extra = 1 if self_query else 0
        m = min(n, k + _EXTRA + extra)
        _, cand = self._tree.query(queries, k=m)
        cand = cand.reshape(len(queries), -1)
        diff = self.points[cand] - queries[:, None, :]
        d = row_distances(diff.reshape(-1, diff.shape[-1])).reshape(cand.shape)
        if self_query:
            own = cand == np.arange(len(queries))[:, None]
            d[own] = np.inf
            cand = np.where(own, n, cand)
        order = np.lexsort((cand, d), axis=-1)
        cand = np.take_along_axis(cand, order, axis=-1)
        d = np.take_along_axis(d, order, axis=-1)
        usable = m - extra
        idx[:] = cand[:, :k]
        dist[:] = d[:, :k]
        if usable < avail:
            # k-th distance equals the last usable candidate: ties may run past it
            redo = np.nonzero(d[:, k - 1] >= d[:, usable - 1] * (1 - _TIE_RTOL))[0]
            for i in redo:
                idx[i], dist[i] = self._query_one(queries[i], k, i if self_query else None)
        return idx, dist
