"""
exact euclidean nearest neighbors, the shared base of the proximity detectors

Every distance handed out comes from `row_distances`, whichever search path
found the candidate, so the k-d tree and the brute-force path agree bit for bit
and ties are resolved the same way (lower sample index first).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .utils import parallel_map

logger = logging.getLogger(__name__)

KD_TREE_MAX_DIM = 16
CHUNK = 256
# candidate radius slack, covers rounding differences inside the tree
_REL_SLACK = 1e-9
_ABS_SLACK = 1e-12


def row_distances(X, x, candidates=None):
    rows = X if candidates is None else X[candidates]
    return np.sqrt(((rows - x) ** 2).sum(axis=1))


def check_k(k, n, what="k"):
    if not 1 <= k <= n - 1:
        raise ValueError(f"{what}={k} out of range, need 1 <= {what} <= {n - 1}")


@dataclass(frozen=True)
class NeighborTable:
    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self):
        return self.indices.shape[1]

    def first(self, k):
        "the table restricted to the k nearest neighbors"
        check_k(k, self.k + 1)
        return NeighborTable(self.indices[:, :k], self.distances[:, :k])

    def kth_distance(self, k):
        return self.distances[:, k - 1]


class NeighborIndex:
    "exact search structure over X, a k-d tree up to 16 dimensions"

    def __init__(self, X, threads=1):
        self.X = np.asarray(X, dtype=np.float64)
        self.n, self.d = self.X.shape
        self.threads = threads
        self.tree = cKDTree(self.X) if self.d <= KD_TREE_MAX_DIM else None

    def _chunks(self):
        return [range(s, min(s + CHUNK, self.n)) for s in range(0, self.n, CHUNK)]

    def _candidates(self, rows, radii):
        "indices of every sample that could lie within radii[i] of row i"
        if self.tree is None:
            everything = np.arange(self.n)
            return [everything for _ in rows]
        points = self.X[list(rows)]
        r = radii * (1 + _REL_SLACK) + _ABS_SLACK
        found = self.tree.query_ball_point(points, r)
        return [np.asarray(c, dtype=np.int64) for c in found]

    def _knn_radii(self, rows, k):
        "upper bound on the k-th neighbor distance of each row"
        if self.tree is None:
            return np.full(len(rows), np.inf)
        dist, _ = self.tree.query(self.X[list(rows)], k=k + 1)
        return dist[:, -1]

    def knn(self, k_max) -> NeighborTable:
        check_k(k_max, self.n, "k_max")

        def work(rows):
            radii = self._knn_radii(rows, k_max)
            idx = np.empty((len(rows), k_max), dtype=np.int64)
            dist = np.empty((len(rows), k_max))
            for pos, (i, cand) in enumerate(zip(rows, self._candidates(rows, radii))):
                cand = cand[cand != i]
                dcand = row_distances(self.X, self.X[i], cand)
                order = np.lexsort((cand, dcand))[:k_max]
                idx[pos] = cand[order]
                dist[pos] = dcand[order]
            return idx, dist

        parts = parallel_map(work, self._chunks(), self.threads)
        table = NeighborTable(
            np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
        )
        table.indices.setflags(write=False)
        table.distances.setflags(write=False)
        logger.debug(
            "neighbor table n=%d d=%d k=%d via %s",
            self.n,
            self.d,
            k_max,
            "kd-tree" if self.tree is not None else "brute force",
        )
        return table

    def within(self, radii):
        """
        for each sample i, every other sample at distance <= radii[i], sorted by
        (distance, index); returns a list of (indices, distances)
        """
        radii = np.asarray(radii, dtype=np.float64)

        def work(rows):
            out = []
            for i, cand in zip(rows, self._candidates(rows, radii[list(rows)])):
                cand = cand[cand != i]
                dcand = row_distances(self.X, self.X[i], cand)
                inside = dcand <= radii[i]
                cand, dcand = cand[inside], dcand[inside]
                order = np.lexsort((cand, dcand))
                out.append((cand[order], dcand[order]))
            return out

        parts = parallel_map(work, self._chunks(), self.threads)
        return [item for part in parts for item in part]


def build_neighbor_table(X, k_max, threads=1) -> NeighborTable:
    return NeighborIndex(X, threads).knn(k_max)


def brute_force_table(X, k_max) -> NeighborTable:
    "all-pairs reference search, no spatial index"
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    check_k(k_max, n, "k_max")
    idx = np.empty((n, k_max), dtype=np.int64)
    dist = np.empty((n, k_max))
    everything = np.arange(n)
    for i in range(n):
        cand = everything[everything != i]
        dcand = row_distances(X, X[i], cand)
        order = np.lexsort((cand, dcand))[:k_max]
        idx[i], dist[i] = cand[order], dcand[order]
    return NeighborTable(idx, dist)
