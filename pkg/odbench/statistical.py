"""
histogram, projection, density, copula and cluster based detectors
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp
from scipy.stats import rankdata, skew

from .datamodel import DetectorError
from .neighbors import row_distances

logger = logging.getLogger(__name__)

EPS = 1e-12
LODA_PROJECTIONS = 100
PCA_THRESHOLDS = (0.3, 0.5, 0.7, 0.9)
PCA_MIN_EIGENVALUE = 1e-12
GMM_COMPONENTS = tuple(range(1, 16))
GMM_REG = 1e-6
GMM_TOL = 1e-6
GMM_MAX_ITER = 200
KMEANS_MAX_ITER = 100
CBLOF_K = tuple(range(2, 15))
CBLOF_ALPHA = (0.7, 0.8, 0.9)
CBLOF_BETA = (3, 5, 7)
# squared distances held at once by the KDE, rows x n
KDE_BLOCK = 1 << 22


# histograms


def equal_width_counts(sorted_x, lo, hi, bins):
    "bin counts over [lo, hi]; bins are half open except the last one"
    edges = np.linspace(lo, hi, bins + 1)
    below = np.searchsorted(sorted_x, edges[1:-1], side="left")
    return np.diff(np.concatenate(([0], below, [sorted_x.size]))), edges


def birge_rozenholc_bins(x):
    """
    bin count maximizing the penalized histogram log-likelihood
    L(D) - (D - 1 + log(D)^2.5), the smallest D on ties
    """
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.size
    if n < 2:
        raise ValueError(f"need at least 2 values, got {n}")
    lo, hi = x[0], x[-1]
    if lo == hi:
        return 1
    d_max = max(int(n / math.log(n)), 2)
    best, best_value = 1, -np.inf
    for bins in range(1, d_max + 1):
        counts, _ = equal_width_counts(x, lo, hi, bins)
        filled = counts[counts > 0]
        likelihood = float(np.sum(filled * np.log(bins * filled / n)))
        value = likelihood - (bins - 1 + math.log(bins) ** 2.5)
        if value > best_value:
            best, best_value = bins, value
    return best


@dataclass(frozen=True)
class HistogramModel:
    edges: np.ndarray
    counts: np.ndarray

    @classmethod
    def fit(cls, x, bins=None):
        x = np.asarray(x, dtype=np.float64)
        bins = bins or birge_rozenholc_bins(x)
        xs = np.sort(x)
        counts, edges = equal_width_counts(xs, xs[0], xs[-1], bins)
        return cls(edges, counts)

    @property
    def bins(self):
        return self.counts.size

    @property
    def probabilities(self):
        return self.counts / self.counts.sum()

    def bin_of(self, x):
        idx = np.searchsorted(self.edges, x, side="right") - 1
        return np.clip(idx, 0, self.bins - 1)

    def relative_height(self, x):
        "bin height divided by the tallest bin"
        return self.counts[self.bin_of(x)] / self.counts.max()

    def density(self, x):
        width = (self.edges[-1] - self.edges[0]) / self.bins
        if width == 0:
            return np.ones(np.shape(x))
        return self.counts[self.bin_of(x)] / (self.counts.sum() * width)


def hbos_score(X):
    "sum over features of log(1 / relative bin height)"
    X = np.asarray(X, dtype=np.float64)
    score = np.zeros(X.shape[0])
    for f in range(X.shape[1]):
        model = HistogramModel.fit(X[:, f])
        score += np.log(1.0 / (model.relative_height(X[:, f]) + EPS))
    return score


def loda_projections(d, rng, count=LODA_PROJECTIONS):
    nonzero = math.ceil(math.sqrt(d))
    W = np.zeros((count, d))
    for w in W:
        dims = rng.choice(d, size=nonzero, replace=False)
        w[dims] = rng.standard_normal(nonzero)
    return W


def loda_score(X, seed=0, projections=LODA_PROJECTIONS):
    "negative mean log density over sparse random 1D projections"
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(seed)
    W = loda_projections(X.shape[1], rng, projections)
    total = np.zeros(X.shape[0])
    for w in W:
        z = X @ w
        total += np.log(HistogramModel.fit(z).density(z) + EPS)
    return -total / projections


# linear and density models


def principal_components(X):
    "eigenvalues (descending) and eigenvectors of the sample covariance"
    C = np.atleast_2d(np.cov(X, rowvar=False))
    values, vectors = np.linalg.eigh(C)
    return values[::-1], vectors[:, ::-1]


def retained_components(eigenvalues, threshold):
    "smallest leading set whose explained variance ratio exceeds threshold"
    usable = int(np.sum(eigenvalues > PCA_MIN_EIGENVALUE))
    ratio = np.cumsum(eigenvalues) / eigenvalues.sum()
    above = np.flatnonzero(ratio > threshold)
    m = int(above[0]) + 1 if above.size else eigenvalues.size
    return max(min(m, usable), 1)


def pca_score(X, variance_threshold=0.9):
    "sum of squared projections on the retained components over their variance"
    if not 0 < variance_threshold < 1:
        raise ValueError(
            f"variance_threshold must be in (0, 1), got {variance_threshold}"
        )
    X = np.asarray(X, dtype=np.float64)
    values, vectors = principal_components(X)
    if values[0] <= PCA_MIN_EIGENVALUE:
        raise DetectorError("PCA: covariance has no usable component")
    m = retained_components(values, variance_threshold)
    proj = (X - X.mean(axis=0)) @ vectors[:, :m]
    return np.sum(proj**2 / values[:m], axis=1)


def scott_bandwidth(X):
    n, d = X.shape
    return X.std(axis=0, ddof=1) * n ** (-1.0 / (d + 4))


def kde_log_density(X):
    "leave-one-out gaussian product-kernel log density of every sample"
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError(f"KDE needs at least 2 samples, got {n}")
    h = scott_bandwidth(X)
    Z = X / h
    norm = math.log(n - 1) + np.log(h).sum() + 0.5 * d * math.log(2 * math.pi)
    out = np.empty(n)
    step = max(1, KDE_BLOCK // n)
    for start in range(0, n, step):
        rows = slice(start, min(start + step, n))
        sq = cdist(Z[rows], Z, "sqeuclidean")
        sq[np.arange(sq.shape[0]), np.arange(rows.start, rows.stop)] = np.inf
        out[rows] = logsumexp(-0.5 * sq, axis=1) - norm
    return out


def kde_score(X):
    "negative log of the leave-one-out density, floored at EPS"
    return -np.logaddexp(kde_log_density(X), math.log(EPS))


# clustering


def kmeans_plusplus(X, k, rng):
    "distance-weighted seeding, returns indices of the chosen rows"
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = row_distances(X, X[chosen[0]]) ** 2
    while len(chosen) < k:
        total = closest.sum()
        if total == 0:
            break
        nxt = int(rng.choice(n, p=closest / total))
        chosen.append(nxt)
        closest = np.minimum(closest, row_distances(X, X[nxt]) ** 2)
    return chosen


def nearest_center(X, centers):
    dist = np.stack([row_distances(X, c) for c in centers], axis=1)
    labels = np.argmin(dist, axis=1)
    return labels, dist[np.arange(X.shape[0]), labels]


def kmeans(X, k, rng, max_iter=KMEANS_MAX_ITER):
    """
    lloyd iterations from k-means++ seeds; clusters that end up empty are
    dropped, labels index the returned centers
    """
    X = np.asarray(X, dtype=np.float64)
    k = min(k, X.shape[0])
    centers = X[kmeans_plusplus(X, k, rng)]
    labels, _ = nearest_center(X, centers)
    for it in range(max_iter):
        centers = np.array(
            [
                X[labels == c].mean(axis=0) if np.any(labels == c) else centers[c]
                for c in range(centers.shape[0])
            ]
        )
        new_labels, _ = nearest_center(X, centers)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    logger.debug("k-means k=%d stopped after %d iterations", k, it + 1)
    used = np.unique(labels)
    remap = np.full(centers.shape[0], -1)
    remap[used] = np.arange(used.size)
    return centers[used], remap[labels]


@dataclass(frozen=True)
class ClusterSplit:
    sizes: Tuple[int, ...]
    boundary: int
    alpha: float
    beta: float

    def __post_init__(self):
        b, sizes = self.boundary, self.sizes
        assert 1 <= b <= len(sizes)
        assert list(sizes) == sorted(sizes, reverse=True)
        if b < len(sizes):
            assert (
                sum(sizes[:b]) >= self.alpha * sum(sizes)
                or sizes[b - 1] / sizes[b] >= self.beta
            )


def split_clusters(sizes, alpha, beta) -> ClusterSplit:
    "first b whose clusters cover alpha*n or whose size ratio to b+1 is >= beta"
    sizes = tuple(sorted((int(s) for s in sizes), reverse=True))
    n = sum(sizes)
    covered = 0
    for b in range(1, len(sizes)):
        covered += sizes[b - 1]
        if covered >= alpha * n or sizes[b - 1] / sizes[b] >= beta:
            return ClusterSplit(sizes, b, alpha, beta)
    return ClusterSplit(sizes, len(sizes), alpha, beta)


def cblof_from_clusters(X, centers, labels, alpha, beta, weighted):
    sizes = np.bincount(labels, minlength=centers.shape[0])
    by_size = np.argsort(-sizes, kind="stable")
    split = split_clusters(sizes, alpha, beta)
    large = by_size[: split.boundary]
    is_large = np.isin(labels, large)
    own = row_distances_to(X, centers, labels)
    _, to_large = nearest_center(X, centers[large])
    dist = np.where(is_large, own, to_large)
    if weighted:
        dist = dist * sizes[labels]
    return dist


def row_distances_to(X, centers, labels):
    return np.sqrt(((X - centers[labels]) ** 2).sum(axis=1))


def cblof_score(X, k=8, alpha=0.9, beta=5, weighted=True, seed=0):
    """
    cluster-based local outlier factor; u-CBLOF is weighted=False
    """
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(seed)
    centers, labels = kmeans(X, k, rng)
    return cblof_from_clusters(X, centers, labels, alpha, beta, weighted)


# mixtures


@dataclass
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood_history: List[float]

    def component_log_density(self, X):
        n, d = X.shape
        out = np.empty((n, self.weights.size))
        for c, (mean, cov) in enumerate(zip(self.means, self.covariances)):
            try:
                L = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise DetectorError(
                    f"GMM component {c}: covariance not positive definite"
                )
            sol = np.linalg.solve(L, (X - mean).T)
            logdet = 2.0 * np.log(np.diag(L)).sum()
            out[:, c] = -0.5 * (
                (sol**2).sum(axis=0) + logdet + d * math.log(2 * math.pi)
            )
        return out + np.log(self.weights)

    def score_samples(self, X):
        "log p(x) of every row"
        return logsumexp(self.component_log_density(X), axis=1)


def _m_step(X, resp, reg):
    nk = resp.sum(axis=0) + 10 * np.finfo(np.float64).eps
    means = (resp.T @ X) / nk[:, None]
    covs = []
    for c in range(resp.shape[1]):
        diff = X - means[c]
        cov = (resp[:, c, None] * diff).T @ diff / nk[c]
        covs.append(cov + reg * np.eye(X.shape[1]))
    return nk / X.shape[0], means, np.array(covs)


def fit_gmm(
    X, n_components, seed=0, reg=GMM_REG, tol=GMM_TOL, max_iter=GMM_MAX_ITER
) -> GaussianMixture:
    """
    full-covariance EM initialized from a k-means++ hard assignment;
    stops once the mean log-likelihood gains less than tol
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    k = min(n_components, n)
    rng = np.random.default_rng(seed)
    labels, _ = nearest_center(X, X[kmeans_plusplus(X, k, rng)])
    k = int(labels.max()) + 1
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    model = GaussianMixture(*_m_step(X, resp, reg), log_likelihood_history=[])
    for it in range(max_iter):
        joint = model.component_log_density(X)
        per_sample = logsumexp(joint, axis=1)
        if not np.all(np.isfinite(per_sample)):
            bad = np.flatnonzero(~np.all(np.isfinite(joint), axis=0))
            c = int(bad[0]) if bad.size else 0
            raise DetectorError(f"GMM diverged: component {c} non-finite likelihood")
        ll = float(per_sample.mean())
        history = model.log_likelihood_history
        history.append(ll)
        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            break
        resp = np.exp(joint - per_sample[:, None])
        model = GaussianMixture(*_m_step(X, resp, reg), log_likelihood_history=history)
    logger.debug("GMM k=%d stopped after %d iterations", k, it + 1)
    return model


def gmm_score(X, n_components=1, seed=0):
    "negative log-likelihood under a fitted gaussian mixture"
    X = np.asarray(X, dtype=np.float64)
    model = fit_gmm(X, n_components, seed)
    log_p = model.score_samples(X)
    if not np.all(np.isfinite(log_p)):
        raise DetectorError("GMM produced a non-finite sample likelihood")
    return -log_p


# copula / ecdf


def _tail_logs(X, denominator):
    "(-log left tail, -log right tail) per sample and feature"
    left = np.apply_along_axis(rankdata, 0, X, method="max") / denominator
    right = np.apply_along_axis(rankdata, 0, -X, method="max") / denominator
    return -np.log(left), -np.log(right)


def _skew_selected(X, left, right):
    "left tail where a feature is negatively skewed, right tail otherwise"
    s = np.nan_to_num(np.atleast_1d(skew(X, axis=0, bias=False)))
    return np.where(s < 0, left, right)


def ecdf_tails(X):
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    left, right = _tail_logs(X, n)
    return left, right, _skew_selected(X, left, right)


def break_ties(primary, secondary):
    """
    order by primary, samples tied on it ordered by secondary; the shift stays
    below half the smallest gap between distinct primary values
    """
    levels = np.unique(primary)
    span = np.ptp(secondary)
    if levels.size == primary.size or span == 0:
        return primary
    gap = np.diff(levels).min() if levels.size > 1 else 1.0
    return primary + (secondary - secondary.min()) / span * (0.5 * gap)


def ecod_score(X):
    """
    maximum of the summed left, right and skew-selected tail surprisals;
    ties in that maximum go to the larger skew-selected sum
    """
    left, right, skewed = ecdf_tails(X)
    corrected = skewed.sum(axis=1)
    sums = [left.sum(axis=1), right.sum(axis=1), corrected]
    return break_ties(np.maximum.reduce(sums), corrected)


def copod_score(X):
    """
    empirical copula detector; per feature the skew-selected tail is compared
    with the mean of both tails and the larger one is summed over features
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    left, right = _tail_logs(X, n + 1)
    skewed = _skew_selected(X, left, right)
    return np.maximum(skewed, 0.5 * (left + right)).sum(axis=1)
