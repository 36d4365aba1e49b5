"""
isolation based ensembles: isolation forest, extended isolation forest and
nearest-neighbor ensemble isolation (INNE)

Trees are built on a subsample and every sample of X is routed through the
same recursion, so fitting and scoring happen in one pass (transductive).
Tree i draws from SeedSequence(seed, spawn_key=(i,)), which makes the result
independent of how trees are spread over workers.
"""
import logging
import math

import numpy as np
from scipy.special import digamma

from .neighbors import row_distances
from .utils import member_rng, parallel_map

logger = logging.getLogger(__name__)

N_TREES = 1000
SUBSAMPLES = (128, 256, 512, 1024)
EXTENSION_LEVELS = (1, 2, 3)
INNE_ESTIMATORS = 200
INNE_SUBSAMPLE = 8
BATCH = 64


def harmonic(m):
    return float(digamma(m + 1) + np.euler_gamma)


def path_length_norm(m):
    "average unsuccessful-search path length c(m) of a binary search tree"
    if m <= 1:
        return 0.0
    if m == 2:
        return 1.0
    return 2.0 * harmonic(m - 1) - 2.0 * (m - 1) / m


def axis_split(points, rng):
    "uniform attribute among those that vary, uniform threshold in its range"
    lo, hi = points.min(axis=0), points.max(axis=0)
    varying = np.flatnonzero(hi > lo)
    if varying.size == 0:
        return None
    q = varying[rng.integers(varying.size)]
    p = rng.uniform(lo[q], hi[q])
    return lambda Z: Z[:, q] < p


def hyperplane_split(extension):
    def split(points, rng):
        lo, hi = points.min(axis=0), points.max(axis=0)
        if not np.any(hi > lo):
            return None
        d = points.shape[1]
        normal = np.zeros(d)
        dims = rng.choice(d, size=extension + 1, replace=False)
        normal[dims] = rng.standard_normal(extension + 1)
        intercept = rng.uniform(lo, hi)
        return lambda Z: (Z - intercept) @ normal <= 0

    return split


def tree_sample(n, psi, rng):
    "psi distinct row indices, drawn without replacement"
    return rng.choice(n, size=psi, replace=False)


def isolation_depths(X, sample, limit, rng, splitter):
    """
    path length of every row of X in one random tree grown on X[sample]
    """
    depths = np.empty(X.shape[0])
    stack = [(sample, np.arange(X.shape[0]), 0)]
    while stack:
        s_idx, q_idx, depth = stack.pop()
        if q_idx.size == 0:
            continue
        split = None
        if depth < limit and s_idx.size > 1:
            split = splitter(X[s_idx], rng)
        if split is None:
            depths[q_idx] = depth + path_length_norm(s_idx.size)
            continue
        s_left = split(X[s_idx])
        q_left = split(X[q_idx])
        stack.append((s_idx[~s_left], q_idx[~q_left], depth + 1))
        stack.append((s_idx[s_left], q_idx[q_left], depth + 1))
    return depths


def _forest_depths(X, n_trees, subsample, seed, splitter, workers):
    """
    mean path length over the forest, compensated sum in tree order
    """
    n = X.shape[0]
    psi = min(subsample, n)
    limit = math.ceil(math.log2(psi))
    total = np.zeros(n)
    comp = np.zeros(n)

    def grow(i):
        rng = member_rng(seed, i)
        sample = tree_sample(n, psi, rng)
        return isolation_depths(X, sample, limit, rng, splitter)

    for start in range(0, n_trees, BATCH):
        trees = range(start, min(start + BATCH, n_trees))
        for h in parallel_map(grow, trees, workers):
            t = total + h
            big = np.abs(total) >= np.abs(h)
            comp += np.where(big, (total - t) + h, (h - t) + total)
            total = t
        logger.debug("grown %d/%d trees", trees.stop, n_trees)
    return (total + comp) / n_trees, psi


def _forest_score(X, n_trees, subsample, seed, splitter, workers):
    X = np.asarray(X, dtype=np.float64)
    mean_depth, psi = _forest_depths(X, n_trees, subsample, seed, splitter, workers)
    return np.power(2.0, -mean_depth / path_length_norm(psi))


def if_score(X, subsample=256, n_trees=N_TREES, seed=0, workers=1):
    "isolation forest with axis-parallel splits"
    return _forest_score(X, n_trees, subsample, seed, axis_split, workers)


def clamp_extension(extension, d):
    return min(extension, d - 1)


def eif_score(
    X, subsample=256, extension_level=1, n_trees=N_TREES, seed=0, workers=1
):
    "extended isolation forest, hyperplanes with extension_level + 1 free directions"
    d = np.shape(X)[1]
    extension = clamp_extension(extension_level, d)
    if extension != extension_level:
        logger.debug("extension level %d clamped to %d", extension_level, extension)
    return _forest_score(
        X, n_trees, subsample, seed, hyperplane_split(extension), workers
    )


def inne_estimator_scores(X, centers):
    """
    isolation scores of the rows of X for one estimator whose hyperspheres are
    centered on `centers`
    """
    X = np.asarray(X, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    m = centers.shape[0]
    cdist = np.array([row_distances(centers, c) for c in centers])
    np.fill_diagonal(cdist, np.inf)
    nearest = np.argmin(cdist, axis=1)
    radius = cdist[np.arange(m), nearest]
    # covering sphere with the smallest radius, first center on ties
    order = np.argsort(radius, kind="stable")
    scores = np.ones(X.shape[0])
    unresolved = np.ones(X.shape[0], dtype=bool)
    for c in order:
        inside = unresolved & (row_distances(X, centers[c]) <= radius[c])
        scores[inside] = 1.0 - radius[nearest[c]] / radius[c]
        unresolved &= ~inside
    return scores


def inne_score(
    X, subsample=INNE_SUBSAMPLE, n_estimators=INNE_ESTIMATORS, seed=0, workers=1
):
    "mean isolation score over estimators of psi hyperspheres each"
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    psi = min(subsample, n)

    def estimate(i):
        rng = member_rng(seed, i)
        sample = tree_sample(n, psi, rng)
        return inne_estimator_scores(X, X[sample])

    return np.mean(parallel_map(estimate, range(n_estimators), workers), axis=0)
