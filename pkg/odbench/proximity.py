"""
distance and density based detectors: kNN, kth-NN, LOF, ensemble-LOF, COF,
ODIN and ABOD

Every function takes the preprocessed matrix and optionally a prebuilt
NeighborIndex / NeighborTable so a hyperparameter grid shares one search.
"""
import logging

import numpy as np

from .datamodel import DetectorError
from .neighbors import NeighborIndex, check_k, row_distances

logger = logging.getLogger(__name__)

ABOD_K = 60
K_GRID = tuple(range(5, 31))
COF_K_GRID = (5, 10, 15, 20, 25, 30)


def _table(X, k, index=None, table=None):
    n = np.shape(X)[0]
    check_k(k, n)
    if table is not None and table.k >= k:
        return table.first(k)
    return (index or NeighborIndex(X)).knn(k)


def knn_score(X, k, index=None, table=None):
    "mean distance to the k nearest neighbors"
    return _table(X, k, index, table).distances.mean(axis=1)


def kthnn_score(X, k, index=None, table=None):
    "distance to the k-th nearest neighbor"
    return _table(X, k, index, table).kth_distance(k).copy()


def lof_score(X, k, index=None, table=None):
    """
    local outlier factor with k-distance neighborhoods, which hold every point
    at distance <= k-distance and so may exceed k members under ties
    """
    X = np.asarray(X, dtype=np.float64)
    index = index or NeighborIndex(X)
    kdist = _table(X, k, index, table).kth_distance(k)
    hoods = index.within(kdist)
    lrd = np.empty(X.shape[0])
    for i, (members, dist) in enumerate(hoods):
        reach = np.maximum(kdist[members], dist).sum()
        if reach == 0:
            raise DetectorError(
                f"LOF: sample {i} has zero reachability distance (duplicate points)"
            )
        lrd[i] = members.size / reach
    return np.array(
        [lrd[members].mean() / lrd[i] for i, (members, _) in enumerate(hoods)]
    )


def ensemble_lof_score(X, k_grid=K_GRID, index=None, table=None):
    "per-sample maximum of the LOF scores over k_grid"
    k_grid = list(k_grid)
    if not k_grid:
        raise ValueError("ensemble-LOF needs a non-empty k grid")
    index = index or NeighborIndex(X)
    if table is None or table.k < max(k_grid):
        table = index.knn(max(k_grid))
    return np.max([lof_score(X, k, index, table) for k in k_grid], axis=0)


def sbn_costs(D):
    """
    edge costs of the set-based nearest path through the points of D, starting
    at point 0; D is the pairwise distance matrix of the point and its k
    neighbors, costs come out in path order
    """
    m = D.shape[0]
    reached = np.zeros(m, dtype=bool)
    reached[0] = True
    to_set = D[0].copy()
    costs = np.empty(m - 1)
    for step in range(m - 1):
        candidates = np.flatnonzero(~reached)
        # lowest position wins ties, positions follow sample index order
        nxt = candidates[np.argmin(to_set[candidates])]
        costs[step] = to_set[nxt]
        reached[nxt] = True
        to_set = np.minimum(to_set, D[nxt])
    return costs


def average_chaining_distance(costs):
    k = costs.size
    weights = 2.0 * (k + 1 - np.arange(1, k + 1)) / (k * (k + 1))
    return float(np.dot(weights, costs))


def cof_score(X, k, index=None, table=None):
    """
    connectivity-based outlier factor; only the (k+1) x (k+1) distances of
    one neighborhood are held at a time
    """
    X = np.asarray(X, dtype=np.float64)
    nbrs = _table(X, k, index, table).indices
    ac = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        others = np.sort(nbrs[i])
        members = np.concatenate(([i], others))
        pts = X[members]
        D = np.array([row_distances(pts, p) for p in pts])
        ac[i] = average_chaining_distance(sbn_costs(D))
    total = ac[nbrs].sum(axis=1)
    return ac * k / total


def odin_score(X, k, index=None, table=None):
    "negative indegree in the directed k-NN graph"
    nbrs = _table(X, k, index, table).indices
    indegree = np.bincount(nbrs.ravel(), minlength=np.shape(X)[0])
    return -indegree.astype(np.float64)


def abod_k(n, k=ABOD_K):
    if n < 4:
        raise ValueError(f"ABOD needs at least 4 samples, got {n}")
    # the default neighborhood needs n > 62, below that it shrinks to n - 3
    if k == ABOD_K and n <= k + 2:
        return max(n - 3, 2)
    if k > n - 1:
        return max(n - 3, 2)
    return k


def angle_terms(A):
    "<a,b>/(|a|^2 |b|^2) over every unordered pair of rows of A"
    G = A @ A.T
    sq = np.diag(G)
    iu = np.triu_indices(A.shape[0], 1)
    return G[iu] / (sq[iu[0]] * sq[iu[1]])


def abod_score(X, k=ABOD_K, index=None, table=None):
    "negated fast angle-based outlier factor over the k nearest neighbors"
    X = np.asarray(X, dtype=np.float64)
    k = abod_k(X.shape[0], k)
    nbrs = _table(X, k, index, table).indices
    scores = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        scores[i] = -np.var(angle_terms(X[nbrs[i]] - X[i]))
    return scores
