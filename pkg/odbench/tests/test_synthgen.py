import json
import math

import numpy as np
import pytest
from scipy.spatial import Delaunay

from odbench.datamodel import read_csv, validate_dataset
from odbench.evaluation import roc_auc
from odbench.isolation import eif_score, if_score
from odbench.neighbors import NeighborIndex
from odbench.proximity import K_GRID, lof_score
from odbench.synthgen import (
    ARCHETYPES,
    ArchetypeSpec,
    generate_archetype,
    isolated_shell,
    mahalanobis_sq,
    write_archetype,
)


def split(dataset):
    anomalous = dataset.labels == 1
    return dataset.features[~anomalous], dataset.features[anomalous]


@pytest.mark.parametrize("archetype", ARCHETYPES)
def test_anomaly_count_and_determinism(archetype):
    spec = ArchetypeSpec(archetype, n=400, d=3, contamination=0.05, seed=11)
    first = generate_archetype(spec)
    second = generate_archetype(spec)
    assert first.n == 400 and first.d == 3
    assert first.n_anomalies == 20
    np.testing.assert_array_equal(first.features, second.features)
    np.testing.assert_array_equal(first.labels, second.labels)
    other = generate_archetype(ArchetypeSpec(archetype, 400, 3, 0.05, seed=12))
    assert not np.array_equal(first.features, other.features)


@pytest.mark.parametrize(
    "kwargs, match",
    [
        ({"archetype": "spiral"}, "unknown archetype"),
        ({"archetype": "global", "d": 1}, "d >= 2"),
        ({"archetype": "global", "contamination": 0.5}, "contamination"),
        ({"archetype": "global", "n": 10, "contamination": 0.01}, "no anomaly"),
    ],
)
def test_spec_rejects(kwargs, match):
    with pytest.raises(ValueError, match=match):
        ArchetypeSpec(**kwargs)


def test_peripheral_anomalies_leave_the_box():
    normal, anomalies = split(generate_archetype(ArchetypeSpec("peripheral", seed=1)))
    lo, hi = normal.min(axis=0), normal.max(axis=0)
    outside = (anomalies < lo) | (anomalies > hi)
    assert np.all(outside.any(axis=1))


def test_global_anomalies_are_far_from_everything():
    dataset = generate_archetype(ArchetypeSpec("global", n=1000, seed=2))
    table = NeighborIndex(dataset.features).knn(10)
    kth = table.kth_distance(10)
    cutoff = np.percentile(kth[dataset.labels == 0], 95)
    assert np.all(kth[dataset.labels == 1] > cutoff)


def test_enclosed_anomalies_sit_inside_the_hull():
    normal, anomalies = split(generate_archetype(ArchetypeSpec("enclosed", seed=3)))
    hull = Delaunay(normal)
    assert np.all(hull.find_simplex(anomalies) >= 0)
    # and nothing normal sits in the core
    assert np.linalg.norm(normal, axis=1).min() >= 3.0


def test_univariate_anomalies_have_one_extreme_coordinate():
    normal, anomalies = split(generate_archetype(ArchetypeSpec("univariate", d=4)))
    q1, q3 = np.percentile(normal, [25, 75], axis=0)
    median = np.median(normal, axis=0)
    extreme = np.abs(anomalies - median) >= 5.9 * (q3 - q1)
    assert np.all(extreme.sum(axis=1) >= 1)


def test_multivariate_anomalies_hide_in_the_marginals():
    normal, anomalies = split(generate_archetype(ArchetypeSpec("multivariate", seed=4)))
    lo, hi = normal.min(axis=0), normal.max(axis=0)
    assert np.all((anomalies > lo) & (anomalies < hi))
    cutoff = np.percentile(mahalanobis_sq(normal, normal), 99)
    assert np.all(mahalanobis_sq(anomalies, normal) > cutoff - 1e-9)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("contamination", [0.01, 0.05, 0.2, 0.45])
def test_isolated_anomalies_keep_apart(contamination, d):
    spec = ArchetypeSpec("isolated", d=d, contamination=contamination, seed=5)
    _, anomalies = split(generate_archetype(spec))
    assert len(anomalies) == spec.n_anomalies
    gaps = np.linalg.norm(anomalies[:, None] - anomalies[None, :], axis=2)
    np.fill_diagonal(gaps, np.inf)
    assert gaps.min() >= 3.0
    assert np.linalg.norm(anomalies, axis=1).min() >= 10.0


def test_clustered_anomalies_form_a_tight_group():
    _, anomalies = split(generate_archetype(ArchetypeSpec("clustered", seed=6)))
    assert np.all(anomalies.std(axis=0) < 0.5)


def test_sidecar_round_trip(tmp_path):
    dataset = generate_archetype(ArchetypeSpec("local", n=200, seed=7))
    path = write_archetype(dataset, tmp_path)
    assert path.name == "local-7.csv"
    back = validate_dataset(read_csv(path))
    np.testing.assert_array_equal(back.features, dataset.features)
    np.testing.assert_array_equal(back.labels, dataset.labels)
    sidecar = json.loads((tmp_path / "local-7.json").read_text())
    assert sidecar["archetype"] == "local"
    assert sidecar["n_anomalies"] == 10
    assert sidecar["construction"]["wide_offset"] == 40.0


def lof_grid_auc(dataset):
    index = NeighborIndex(dataset.features)
    table = index.knn(K_GRID[-1])
    aucs = [
        roc_auc(lof_score(dataset.features, k, index, table), dataset.labels)
        for k in K_GRID
    ]
    return np.mean(aucs)


def isolation_grid_auc(dataset, score, **kwargs):
    aucs = [
        roc_auc(
            score(dataset.features, subsample, n_trees=100, seed=s, **kwargs),
            dataset.labels,
        )
        for s, subsample in enumerate((128, 256))
    ]
    return np.mean(aucs)


def test_local_archetype_favours_lof():
    lof, forest = [], []
    for seed in range(10):
        spec = ArchetypeSpec("local", n=1000, contamination=0.01, seed=seed)
        dataset = generate_archetype(spec)
        lof.append(lof_grid_auc(dataset))
        forest.append(isolation_grid_auc(dataset, if_score))
    assert np.mean(lof) > np.mean(forest)


def test_global_archetype_favours_extended_forest():
    lof, forest = [], []
    for seed in range(10):
        dataset = generate_archetype(ArchetypeSpec("global", n=500, seed=seed))
        lof.append(lof_grid_auc(dataset))
        forest.append(isolation_grid_auc(dataset, eif_score, extension_level=1))
    assert np.mean(forest) >= np.mean(lof)


def test_isolated_shell_widens_with_the_anomaly_count():
    assert isolated_shell(5, 2) == (10.0, 15.0)
    inner, outer = isolated_shell(450, 2)
    assert inner == 10.0
    # the shell holds 36 units of area per anomaly
    assert math.pi * (outer**2 - inner**2) == pytest.approx(450 * 36)
    inner, outer = isolated_shell(450, 3)
    assert 4 / 3 * math.pi * (outer**3 - inner**3) == pytest.approx(450 * 216)
