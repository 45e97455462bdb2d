"""Exact k-nearest-neighbor queries under the Euclidean norm.

The backend is a vectorized brute-force scan (squared distances via
``scipy.spatial.distance.cdist``, then a partition/sort per query). Results
are exact and deterministic: neighbors are ordered by squared distance,
with ties broken by ascending training index. Ties therefore depend only
on the data, never on scheduling, which keeps every downstream run
reproducible.

The index is immutable after construction; concurrent queries are safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class NeighborList:
    """Ordered neighbors of one query point.

    ``indices[j]`` is the training-point id of the (j+1)-th nearest
    neighbor and ``distances[j]`` its Euclidean distance. Distances are
    non-decreasing; equal distances appear in ascending index order.
    """

    indices: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return self.indices.shape[0]


class NeighborIndex:
    """Immutable exact-nearest-neighbor index over a training feature set."""

    def __init__(self, features: np.ndarray):
        feats = np.ascontiguousarray(features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError("features must be a non-empty n x d matrix")
        feats.setflags(write=False)
        self._features = feats

    @property
    def n(self) -> int:
        return self._features.shape[0]

    @property
    def d(self) -> int:
        return self._features.shape[1]

    def query(self, x: np.ndarray, k: int, exclude: int | None = None) -> NeighborList:
        """Return the k nearest training points to ``x``.

        ``exclude`` removes one training id from the ranking before
        selection (leave-one-out). The k-th entry's distance is the
        bandwidth used by kernel weighting at neighbor count k.
        """
        q = np.asarray(x, dtype=np.float64).reshape(1, -1)
        if q.shape[1] != self.d:
            raise ValueError(f"query has dimension {q.shape[1]}, index has {self.d}")
        excludes = None if exclude is None else np.array([exclude], dtype=np.int64)
        idx, dist = self.query_batch(q, k, excludes)
        return NeighborList(indices=idx[0], distances=dist[0])

    def query_batch(
        self,
        points: np.ndarray,
        k: int,
        excludes: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized queries: one row of (indices, distances) per point.

        ``excludes``, when given, holds one training id per query row to
        drop before ranking. Output is identical to calling ``query`` per
        row.
        """
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.d:
            raise ValueError(f"points must be b x {self.d}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("query points must be finite")
        available = self.n - (0 if excludes is None else 1)
        if not 1 <= k <= available:
            raise ValueError(f"k={k} out of range 1..{available}")

        d2 = cdist(pts, self._features, "sqeuclidean")
        if excludes is not None:
            excl = np.asarray(excludes, dtype=np.int64)
            if excl.shape != (pts.shape[0],):
                raise ValueError("excludes must provide one id per query point")
            if excl.min() < 0 or excl.max() >= self.n:
                raise ValueError("exclude ids must be valid training indices")
            d2[np.arange(pts.shape[0]), excl] = np.inf

        b, n = d2.shape
        if k < n:
            part = np.argpartition(d2, k - 1, axis=1)[:, :k]
            boundary = np.max(np.take_along_axis(d2, part, axis=1), axis=1)
            below = d2 < boundary[:, None]
            at = d2 == boundary[:, None]
            # fill remaining slots among boundary ties by ascending index
            room = k - below.sum(axis=1)
            keep = below | (at & (np.cumsum(at, axis=1) <= room[:, None]))
        else:
            keep = np.ones_like(d2, dtype=bool)
            if excludes is not None:
                keep[np.arange(b), excl] = False
        rows, cols = np.nonzero(keep)
        cand_idx = cols.reshape(b, k)
        cand_d2 = d2[rows, cols].reshape(b, k)
        order = np.argsort(cand_d2, axis=1, kind="stable")
        idx = np.take_along_axis(cand_idx, order, axis=1)
        dist = np.sqrt(np.take_along_axis(cand_d2, order, axis=1))
        return idx, dist


def build_index(dataset_or_features) -> NeighborIndex:
    """Build a NeighborIndex from a LabeledDataset or a raw feature matrix."""
    features = getattr(dataset_or_features, "features", dataset_or_features)
    return NeighborIndex(features)
