"""
the detector catalogue: display name, hyperparameter grid, whether the
detector is randomized, and how to score a dataset with one grid point
"""
import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import isolation, proximity, statistical
from .datamodel import DetectorSpec, check_scores
from .neighbors import NeighborIndex


class ScoringContext:
    """
    one preprocessed matrix plus lazily built neighbor search structures that
    all grid points of all proximity detectors share
    """

    def __init__(self, X, threads=1):
        self.X = np.asarray(X, dtype=np.float64)
        self.threads = threads
        self._lock = threading.Lock()
        self._index = None
        self._table = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def index(self):
        with self._lock:
            if self._index is None:
                self._index = NeighborIndex(self.X, self.threads)
            return self._index

    def table(self, k):
        "neighbor table holding at least k neighbors, when n allows it"
        # build once for the whole k grid, widen only for larger requests
        k = min(max(k, proximity.K_GRID[-1]), self.n - 1)
        index = self.index
        with self._lock:
            if self._table is None or self._table.k < k:
                self._table = index.knn(k)
            return self._table


@dataclass(frozen=True)
class Detector:
    name: str
    grid: Tuple[Tuple[str, tuple], ...]
    randomized: bool
    scorer: Callable

    @property
    def cardinality(self):
        out = 1
        for _, values in self.grid:
            out *= len(values)
        return out

    def expand(self) -> List[DetectorSpec]:
        names = [name for name, _ in self.grid]
        return [
            DetectorSpec.of(self.name, **dict(zip(names, values)))
            for values in itertools.product(*(v for _, v in self.grid))
        ]


def _neighbors(fn):
    def score(ctx, seed, k):
        return fn(ctx.X, k, index=ctx.index, table=ctx.table(k))

    return score


def _ensemble_lof(ctx, seed):
    k_max = proximity.K_GRID[-1]
    return proximity.ensemble_lof_score(
        ctx.X, proximity.K_GRID, index=ctx.index, table=ctx.table(k_max)
    )


def _abod(ctx, seed):
    k = proximity.abod_k(ctx.n)
    return proximity.abod_score(ctx.X, k, index=ctx.index, table=ctx.table(k))


def _if(ctx, seed, subsample):
    return isolation.if_score(ctx.X, subsample, seed=seed, workers=ctx.threads)


def _eif(ctx, seed, subsample, extension_level):
    return isolation.eif_score(
        ctx.X, subsample, extension_level, seed=seed, workers=ctx.threads
    )


def _inne(ctx, seed):
    return isolation.inne_score(ctx.X, seed=seed, workers=ctx.threads)


def _cblof(weighted):
    def score(ctx, seed, k, alpha, beta):
        return statistical.cblof_score(ctx.X, k, alpha, beta, weighted, seed)

    return score


def _plain(fn):
    return lambda ctx, seed, **params: fn(ctx.X, **params)


def _seeded(fn):
    return lambda ctx, seed, **params: fn(ctx.X, seed=seed, **params)


K = ("k", proximity.K_GRID)
CBLOF_GRID = (
    ("k", statistical.CBLOF_K),
    ("alpha", statistical.CBLOF_ALPHA),
    ("beta", statistical.CBLOF_BETA),
)

DETECTORS: Dict[str, Detector] = {
    d.name: d
    for d in [
        Detector("ABOD", (), False, _abod),
        Detector("CBLOF", CBLOF_GRID, True, _cblof(True)),
        Detector(
            "COF",
            (("k", proximity.COF_K_GRID),),
            False,
            _neighbors(proximity.cof_score),
        ),
        Detector("COPOD", (), False, _plain(statistical.copod_score)),
        Detector("ECOD", (), False, _plain(statistical.ecod_score)),
        Detector(
            "EIF",
            (
                ("subsample", isolation.SUBSAMPLES),
                ("extension_level", isolation.EXTENSION_LEVELS),
            ),
            True,
            _eif,
        ),
        Detector("ensemble-LOF", (), False, _ensemble_lof),
        Detector(
            "GMM",
            (("n_components", statistical.GMM_COMPONENTS),),
            True,
            _seeded(statistical.gmm_score),
        ),
        Detector("HBOS", (), False, _plain(statistical.hbos_score)),
        Detector("IF", (("subsample", isolation.SUBSAMPLES),), True, _if),
        Detector("INNE", (), True, _inne),
        Detector("KDE", (), False, _plain(statistical.kde_score)),
        Detector("kNN", (K,), False, _neighbors(proximity.knn_score)),
        Detector("kth-NN", (K,), False, _neighbors(proximity.kthnn_score)),
        Detector("LODA", (), True, _seeded(statistical.loda_score)),
        Detector("LOF", (K,), False, _neighbors(proximity.lof_score)),
        Detector("ODIN", (K,), False, _neighbors(proximity.odin_score)),
        Detector(
            "PCA",
            (("variance_threshold", statistical.PCA_THRESHOLDS),),
            False,
            _plain(statistical.pca_score),
        ),
        Detector("u-CBLOF", CBLOF_GRID, True, _cblof(False)),
    ]
}

ALGORITHMS = tuple(DETECTORS)


def get_detector(algorithm) -> Detector:
    try:
        return DETECTORS[algorithm]
    except KeyError:
        known = ", ".join(ALGORITHMS)
        raise ValueError(f"unknown algorithm {algorithm!r}, known: {known}")


def expand_grid(algorithm) -> List[DetectorSpec]:
    return get_detector(algorithm).expand()


def validate_spec(spec: DetectorSpec):
    "params must name exactly the grid dimensions and hold grid values"
    detector = get_detector(spec.algorithm)
    grid = dict(detector.grid)
    given = spec.kwargs
    if set(given) != set(grid):
        raise ValueError(
            f"{spec.algorithm}: params {sorted(given)} do not match grid "
            f"dimensions {sorted(grid)}"
        )
    for key, value in given.items():
        if value not in grid[key]:
            raise ValueError(f"{spec.algorithm}: {key}={value} outside its grid")
    return spec


def score(spec: DetectorSpec, ctx: ScoringContext, seed=0):
    detector = get_detector(validate_spec(spec).algorithm)
    values = detector.scorer(ctx, seed, **spec.kwargs)
    return check_scores(values, spec.label())
