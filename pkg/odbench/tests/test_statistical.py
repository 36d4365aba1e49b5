import math
import tracemalloc

import numpy as np
import pytest
from scipy.stats import rankdata

from odbench import statistical
from odbench.datamodel import DetectorError
from odbench.statistical import (
    GMM_REG,
    GaussianMixture,
    HistogramModel,
    birge_rozenholc_bins,
    break_ties,
    cblof_from_clusters,
    cblof_score,
    copod_score,
    ecdf_tails,
    ecod_score,
    fit_gmm,
    gmm_score,
    hbos_score,
    kde_log_density,
    kde_score,
    kmeans,
    loda_score,
    pca_score,
    split_clusters,
)


def penalized_oracle(x):
    n = x.size
    best, best_value = 1, -np.inf
    for bins in range(1, max(int(n / math.log(n)), 2) + 1):
        counts, _ = np.histogram(x, bins=bins, range=(x.min(), x.max()))
        nz = counts[counts > 0]
        penalty = bins - 1 + math.log(bins) ** 2.5
        value = np.sum(nz * np.log(bins * nz / n)) - penalty
        if value > best_value:
            best, best_value = bins, value
    return best


def test_birge_rozenholc_constant():
    assert birge_rozenholc_bins(np.full(20, 3.0)) == 1


def test_birge_rozenholc_matches_exhaustive_search():
    x = np.random.default_rng(0).uniform(size=1000)
    assert birge_rozenholc_bins(x) == penalized_oracle(x)


def test_birge_rozenholc_two_spikes():
    x = np.concatenate([np.zeros(50), np.ones(50)])
    assert birge_rozenholc_bins(x) >= 2


def test_histogram_model():
    model = HistogramModel.fit(np.array([0.0, 0.1, 0.2, 0.9, 1.0]), bins=2)
    np.testing.assert_array_equal(model.counts, [3, 2])
    np.testing.assert_array_equal(model.bin_of(np.array([0.0, 0.5, 1.0])), [0, 1, 1])
    np.testing.assert_allclose(model.density(np.array([0.1])), [1.2])
    np.testing.assert_allclose(model.probabilities, [0.6, 0.4])


def test_hbos_extreme_value():
    x = np.concatenate([np.random.default_rng(1).normal(size=200), [15.0]])
    scores = hbos_score(x[:, None])
    assert scores[200] == scores.max()


def test_hbos_is_additive_over_features():
    X = np.random.default_rng(2).standard_normal((300, 2))
    np.testing.assert_allclose(
        hbos_score(X), hbos_score(X[:, :1]) + hbos_score(X[:, 1:]), atol=1e-9
    )


def test_loda_is_seeded():
    X = np.random.default_rng(3).standard_normal((200, 4))
    np.testing.assert_array_equal(loda_score(X, seed=5), loda_score(X, seed=5))
    assert not np.array_equal(loda_score(X, seed=5), loda_score(X, seed=6))


def test_pca_isotropic_is_mahalanobis():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.standard_normal((400, 2)), [[6.0, 6.0]]])
    scores = pca_score(X, 0.9)
    diff = X - X.mean(axis=0)
    inv = np.linalg.inv(np.cov(X, rowvar=False))
    maha = np.einsum("ij,jk,ik->i", diff, inv, diff)
    np.testing.assert_allclose(scores, maha, rtol=1e-8)
    assert np.argmax(scores) == 400


def test_pca_toy_matrix():
    X = np.array([[1.0, 2.0], [3.0, 3.0], [4.0, 7.0]])
    values, vectors = np.linalg.eig(np.cov(X.T))
    top = np.argmax(values)
    proj = (X - X.mean(axis=0)) @ vectors[:, top]
    np.testing.assert_allclose(pca_score(X, 0.5), proj**2 / values[top], rtol=1e-8)


@pytest.mark.parametrize("threshold", [0.0, 1.0])
def test_pca_threshold_range(threshold):
    with pytest.raises(ValueError):
        pca_score(np.eye(3), threshold)


def kde_oracle(X):
    n, d = X.shape
    h = X.std(axis=0, ddof=1) * n ** (-1 / (d + 4))
    out = []
    for i in range(n):
        total = 0.0
        for j in range(n):
            if j != i:
                z = (X[i] - X[j]) / h
                total += np.prod(np.exp(-0.5 * z**2) / (np.sqrt(2 * np.pi) * h))
        out.append(np.log(total / (n - 1)))
    return np.array(out)


def test_kde_two_points():
    scores = kde_score(np.array([[0.0, 1.0], [2.0, 5.0]]))
    assert scores[0] == scores[1]


def test_kde_matches_kernel_sum():
    X = np.array([[0.0], [0.4], [1.1], [1.3], [4.0]])
    np.testing.assert_allclose(kde_log_density(X), kde_oracle(X), atol=1e-9)
    assert np.argmax(kde_score(X)) == 4


def test_kmeans_drops_nothing_on_separated_blobs():
    rng = np.random.default_rng(5)
    X = np.vstack([rng.normal(0, 0.1, (30, 2)), rng.normal(5, 0.1, (30, 2))])
    centers, labels = kmeans(X, 2, np.random.default_rng(0))
    assert centers.shape == (2, 2)
    assert len(set(labels[:30])) == 1 and len(set(labels[30:])) == 1


@pytest.mark.parametrize(
    "sizes, boundary",
    [([50, 30, 15, 5], 3), ([60, 10, 5], 1), ([100], 1), ([40, 40, 20], 3)],
)
def test_split_clusters(sizes, boundary):
    assert split_clusters(sizes, 0.9, 5).boundary == boundary


def test_cblof_stray_point():
    rng = np.random.default_rng(6)
    X = np.vstack(
        [
            rng.normal(0, 0.5, (200, 2)),
            rng.normal(0, 0.5, (200, 2)) + [10, 0],
            [[5, 8]],
        ]
    )
    for weighted in (True, False):
        assert np.argmax(cblof_score(X, k=2, weighted=weighted, seed=0)) == 400


def test_cblof_weighting():
    X = np.array([[0.0], [0.2], [0.4], [0.6], [10.0], [10.2], [30.0]])
    centers = np.array([[0.3], [10.1], [30.0]])
    labels = np.array([0, 0, 0, 0, 1, 1, 2])
    plain = cblof_from_clusters(X, centers, labels, 0.5, 5, weighted=False)
    weighted = cblof_from_clusters(X, centers, labels, 0.5, 5, weighted=True)
    np.testing.assert_allclose(weighted, plain * np.array([4, 4, 4, 4, 2, 2, 1]))
    # sizes 4, 2, 1 with alpha 0.5: only the first cluster is large
    np.testing.assert_allclose(plain[-1], 29.7)
    np.testing.assert_allclose(plain[4], 9.7)


def test_gmm_single_component_is_mahalanobis():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((300, 3)) @ np.array([[2, 0, 0], [1, 1, 0], [0, 0, 0.5]])
    scores = gmm_score(X, 1)
    cov = np.cov(X, rowvar=False, bias=True) + GMM_REG * np.eye(3)
    diff = X - X.mean(axis=0)
    maha = np.einsum("ij,jk,ik->i", diff, np.linalg.inv(cov), diff)
    np.testing.assert_allclose(
        scores - scores.min(), 0.5 * (maha - maha.min()), rtol=1e-6, atol=1e-9
    )


def test_gmm_em_never_loses_likelihood():
    rng = np.random.default_rng(8)
    X = np.vstack([rng.normal(0, 1, (150, 2)), rng.normal(4, 0.5, (100, 2))])
    model = fit_gmm(X, 3, seed=2)
    history = np.array(model.log_likelihood_history)
    assert history.size >= 2
    assert np.all(np.diff(history) >= -1e-6)


def test_gmm_is_seeded():
    X = np.random.default_rng(9).standard_normal((120, 2))
    np.testing.assert_array_equal(gmm_score(X, 4, seed=1), gmm_score(X, 4, seed=1))


def test_gmm_bad_component_is_named():
    model = GaussianMixture(
        weights=np.array([0.5, 0.5]),
        means=np.zeros((2, 2)),
        covariances=np.array([np.eye(2), -np.eye(2)]),
        log_likelihood_history=[],
    )
    with pytest.raises(DetectorError, match="component 1"):
        model.score_samples(np.zeros((3, 2)))


def test_ecdf_detectors_extreme_right_tail():
    X = np.array([1, 2, 3, 4, 5, 6, 7, 8, 9, 100], dtype=float)[:, None]
    ecod = ecod_score(X)
    copod = copod_score(X)
    assert np.argmax(ecod) == 9 and np.argmax(copod) == 9
    # both extremes reach log 10, the right-skewed tail decides
    assert ecod[0] == pytest.approx(math.log(10))
    assert ecod[9] > ecod[0]
    assert copod[9] == pytest.approx(math.log(11))


def test_ecdf_detectors_extreme_left_tail():
    X = np.array([-100, 1, 2, 3, 4, 5, 6, 7, 8, 9], dtype=float)[:, None]
    assert np.argmax(ecod_score(X)) == 0
    assert np.argmax(copod_score(X)) == 0


def test_break_ties_keeps_distinct_values_in_order():
    primary = np.array([1.0, 3.0, 3.0, 2.0, 3.0])
    secondary = np.array([9.0, 0.0, 5.0, 9.0, 2.0])
    out = break_ties(primary, secondary)
    assert list(np.argsort(out)) == [0, 3, 1, 4, 2]
    assert np.all(np.abs(out - primary) <= 0.5)
    untied = np.array([0.1, 0.3, 0.2])
    np.testing.assert_array_equal(break_ties(untied, secondary[:3]), untied)


def test_ecdf_values_are_multiples_of_one_over_n():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((50, 4))
    left, right, _ = ecdf_tails(X)
    grid = np.arange(1, 51) / 50
    for tail in (left, right):
        values = np.sort(np.exp(-tail), axis=0)
        np.testing.assert_allclose(values, np.tile(grid[:, None], (1, 4)))


@pytest.mark.parametrize("seed", range(100))
def test_copod_ignores_negation(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 3)) ** 3
    np.testing.assert_allclose(copod_score(-X), copod_score(X), rtol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_loda_on_one_feature_ranks_like_hbos(seed):
    x = np.random.default_rng(seed).standard_normal((200, 1))
    np.testing.assert_array_equal(
        rankdata(loda_score(x, seed=seed)), rankdata(hbos_score(x))
    )


def test_kde_memory_stays_bounded():
    X = np.random.default_rng(2).standard_normal((1000, 100))
    tracemalloc.start()
    try:
        kde_score(X)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    assert peak < 64 * 2**20


def test_kde_blocks_do_not_change_the_density(monkeypatch):
    X = np.random.default_rng(3).standard_normal((40, 3))
    whole = kde_log_density(X)
    monkeypatch.setattr(statistical, "KDE_BLOCK", 90)
    np.testing.assert_allclose(kde_log_density(X), whole, rtol=1e-12)
