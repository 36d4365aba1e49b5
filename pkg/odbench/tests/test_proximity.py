import itertools

import numpy as np
import pytest

from odbench.datamodel import DetectorError
from odbench.neighbors import NeighborIndex
from odbench.proximity import (
    abod_k,
    abod_score,
    average_chaining_distance,
    cof_score,
    ensemble_lof_score,
    kthnn_score,
    knn_score,
    lof_score,
    odin_score,
)

LINE = np.array([[0.0], [1.0], [2.0], [10.0]])


def distance_matrix(X):
    return np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))


def knn_sets(X, k):
    "k nearest by (distance, index), self excluded"
    D = distance_matrix(X)
    out = []
    for i in range(len(X)):
        others = [j for j in range(len(X)) if j != i]
        out.append(sorted(others, key=lambda j: (D[i, j], j))[:k])
    return D, out


def lof_oracle(X, k):
    D, nbrs = knn_sets(X, k)
    kdist = np.array([D[i, nbrs[i][-1]] for i in range(len(X))])
    hood = [
        [j for j in range(len(X)) if j != i and D[i, j] <= kdist[i]]
        for i in range(len(X))
    ]
    lrd = np.array(
        [
            len(hood[i]) / sum(max(kdist[o], D[i, o]) for o in hood[i])
            for i in range(len(X))
        ]
    )
    return np.array(
        [np.mean([lrd[o] for o in hood[i]]) / lrd[i] for i in range(len(X))]
    )


def cof_oracle(X, k):
    D, nbrs = knn_sets(X, k)
    ac = []
    for i in range(len(X)):
        path, rest, costs = [i], set(nbrs[i]), []
        while rest:
            best = min(rest, key=lambda o: (min(D[o, p] for p in path), o))
            costs.append(min(D[best, p] for p in path))
            path.append(best)
            rest.remove(best)
        weights = [2.0 * (k + 1 - j) / (k * (k + 1)) for j in range(1, k + 1)]
        ac.append(sum(w * c for w, c in zip(weights, costs)))
    return np.array([ac[i] * k / sum(ac[o] for o in nbrs[i]) for i in range(len(X))])


def abod_oracle(X, k):
    _, nbrs = knn_sets(X, k)
    out = []
    for i in range(len(X)):
        terms = []
        for a, b in itertools.combinations(nbrs[i], 2):
            va, vb = X[a] - X[i], X[b] - X[i]
            terms.append(va @ vb / ((va @ va) * (vb @ vb)))
        out.append(-np.var(terms))
    return np.array(out)


def random_data(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(12, 60))
    d = int(rng.integers(1, 9))
    X = rng.standard_normal((n, d)) * rng.uniform(0.5, 3, d)
    k = int(rng.integers(2, min(10, n - 2)))
    return X, k


def test_knn_and_kthnn_on_a_line():
    np.testing.assert_array_equal(knn_score(LINE, 2), [1.5, 1.0, 1.5, 8.5])
    np.testing.assert_array_equal(kthnn_score(LINE, 2), [2.0, 1.0, 2.0, 9.0])


def test_far_point_has_highest_distance_scores():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.standard_normal((60, 2)) * 0.1, [[8.0, 8.0]]])
    for score in (knn_score, kthnn_score, lof_score, cof_score):
        assert np.argmax(score(X, 5)) == 60
    assert np.argmax(abod_score(X, 10)) == 60


@pytest.mark.parametrize("seed", range(200))
def test_definitional_oracles(seed):
    X, k = random_data(seed)
    index = NeighborIndex(X)
    table = index.knn(k)
    np.testing.assert_allclose(
        lof_score(X, k, index, table), lof_oracle(X, k), rtol=0, atol=1e-9
    )
    np.testing.assert_allclose(
        cof_score(X, k, index, table), cof_oracle(X, k), atol=1e-9
    )
    kk = min(k + 2, len(X) - 1)
    np.testing.assert_allclose(
        abod_score(X, kk), abod_oracle(X, abod_k(len(X), kk)), rtol=1e-9, atol=1e-12
    )


def test_lof_on_planted_points():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [3.0, 3.0]])
    np.testing.assert_allclose(lof_score(X, 2), lof_oracle(X, 2), atol=1e-9)
    assert np.argmax(lof_score(X, 2)) == 4


def test_lof_on_uniform_grid_interior():
    X = np.array([[i, j] for i in range(10) for j in range(10)], dtype=float)
    scores = lof_score(X, 5).reshape(10, 10)
    interior = scores[2:8, 2:8]
    assert np.all((interior >= 0.9) & (interior <= 1.1))


def test_lof_duplicates_fail():
    X = np.array([[0.0], [0.0], [0.0], [5.0]])
    with pytest.raises(DetectorError, match="zero reachability"):
        lof_score(X, 2)


def test_ensemble_lof():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((80, 3))
    np.testing.assert_array_equal(ensemble_lof_score(X, [7]), lof_score(X, 7))
    combined = ensemble_lof_score(X, [5, 10, 15])
    expected = np.max([lof_score(X, k) for k in (5, 10, 15)], axis=0)
    np.testing.assert_array_equal(combined, expected)
    with pytest.raises(ValueError):
        ensemble_lof_score(X, [])


def test_cof_six_points():
    X = np.array([[0, 0], [1, 0], [2, 0], [3, 0], [4, 0], [2, 2]], dtype=float)
    np.testing.assert_allclose(cof_score(X, 3), cof_oracle(X, 3), atol=1e-9)


def test_cof_off_line_point():
    X = np.array([[float(i), 0.0] for i in range(12)] + [[5.5, 1.5]])
    assert np.argmax(cof_score(X, 4)) == 12


def test_average_chaining_distance_weights():
    # k = 2: weights 2*2/6 and 2*1/6
    assert average_chaining_distance(np.array([3.0, 6.0])) == pytest.approx(4.0)


def test_odin_indegree():
    np.testing.assert_array_equal(odin_score(LINE, 1), [-1.0, -2.0, -1.0, 0.0])


def test_odin_symmetric_clique():
    # square corners with k = 3 see each other
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    scores = odin_score(X, 3)
    assert np.all(scores == scores[0])


def test_abod_five_points():
    X = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [4, 3]], dtype=float)
    np.testing.assert_allclose(abod_score(X, 4), abod_oracle(X, 4), atol=1e-12)
    assert np.argmax(abod_score(X, 4)) == 4


def test_abod_k_clamp():
    assert abod_k(100) == 60
    assert abod_k(63) == 60
    assert abod_k(62) == 59
    assert abod_k(61) == 58
    assert abod_k(30) == 27
    assert abod_k(5, 4) == 4
    assert abod_k(4) == 2
    with pytest.raises(ValueError):
        abod_k(3)


PROXIMITY = {
    "kNN": lambda X: knn_score(X, 5),
    "kth-NN": lambda X: kthnn_score(X, 5),
    "LOF": lambda X: lof_score(X, 5),
    "ensemble-LOF": lambda X: ensemble_lof_score(X, [5, 8]),
    "COF": lambda X: cof_score(X, 5),
    "ODIN": lambda X: odin_score(X, 5),
    "ABOD": lambda X: abod_score(X, 10),
}


@pytest.mark.parametrize("name", PROXIMITY)
def test_scores_follow_row_permutation(name):
    rng = np.random.default_rng(11)
    X = rng.standard_normal((50, 3))
    perm = rng.permutation(50)
    score = PROXIMITY[name]
    np.testing.assert_allclose(score(X[perm]), score(X)[perm], rtol=1e-12, atol=0)


@pytest.mark.parametrize("name", PROXIMITY)
def test_scores_ignore_a_constant_shift(name):
    rng = np.random.default_rng(12)
    X = rng.standard_normal((50, 3))
    shifted = X + np.array([7.5, -3.25, 0.5])
    score = PROXIMITY[name]
    np.testing.assert_allclose(score(shifted), score(X), rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("name", PROXIMITY)
def test_single_far_point_scores_highest(name):
    for seed in range(50):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.standard_normal((60, 2)), [[10.0, 10.0]]])
        scores = PROXIMITY[name](X)
        if name == "ODIN":
            # every point outside all neighbor lists shares the top score
            assert scores[60] == scores.max()
        else:
            assert np.argmax(scores) == 60
