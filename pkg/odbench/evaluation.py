import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
from scipy.stats import rankdata

from . import registry
from .datamodel import AucMatrix, Dataset, DetectorSpec
from .utils import derive_seed, parallel_map

logger = logging.getLogger(__name__)

EXCLUDE_LOW = 0.4
EXCLUDE_HIGH = 0.6


class TaskFailed(RuntimeError):
    def __init__(self, algorithm, dataset, point, cause):
        self.algorithm = algorithm
        self.dataset = dataset
        self.point = point
        self.cause = cause
        super().__init__(f"{algorithm} on {dataset} at {point}: {cause}")

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "dataset": self.dataset,
            "grid_point": self.point,
            "error": f"{type(self.cause).__name__}: {self.cause}",
        }


def roc_auc(scores, labels):
    """
    area under the ROC curve from average ranks (Mann-Whitney U), ties
    between an anomaly and a normal sample count one half
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores for {labels.size} labels")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes, got single-class labels")
    ranks = rankdata(scores)
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class GridResult:
    algorithm: str
    dataset: str
    points: Tuple[Tuple[str, float], ...]
    mean: float

    @classmethod
    def from_points(cls, algorithm, dataset, points):
        points = tuple(points)
        mean = math.fsum(auc for _, auc in points) / len(points)
        return cls(algorithm, dataset, points, mean)

    @property
    def aucs(self):
        return [auc for _, auc in self.points]

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "dataset": self.dataset,
            "grid": [{"params": label, "auc": auc} for label, auc in self.points],
            "mean_auc": self.mean,
        }


def point_seed(master_seed, dataset, spec: DetectorSpec, repeat):
    return derive_seed(master_seed, spec.algorithm, dataset, spec.label(), repeat)


def evaluate_point(
    spec: DetectorSpec, dataset: Dataset, ctx, master_seed=0, repeats=1
) -> float:
    """
    AUC of one grid point scored on the whole dataset; randomized detectors
    are averaged over `repeats` derived seeds
    """
    labels = dataset.evaluation_labels()
    detector = registry.get_detector(spec.algorithm)
    runs = repeats if detector.randomized else 1
    aucs = []
    for r in range(runs):
        seed = point_seed(master_seed, dataset.name, spec, r)
        try:
            scores = registry.score(spec, ctx, seed)
        except Exception as e:
            raise TaskFailed(spec.algorithm, dataset.name, spec.label(), e) from e
        aucs.append(roc_auc(scores, labels))
    return math.fsum(aucs) / runs


def grid_average(
    algorithm, dataset: Dataset, master_seed=0, repeats=1, threads=1, ctx=None
) -> GridResult:
    "evaluate every grid point on all of the data and average the AUCs"
    ctx = ctx or registry.ScoringContext(dataset.features, threads)
    specs = registry.expand_grid(algorithm)
    aucs = parallel_map(
        lambda spec: evaluate_point(spec, dataset, ctx, master_seed, repeats),
        specs,
        threads,
    )
    result = GridResult.from_points(
        algorithm, dataset.name, zip((s.label() for s in specs), aucs)
    )
    logger.debug("%s on %s: mean AUC %.4f", algorithm, dataset.name, result.mean)
    return result


def percent_of_max(auc: AucMatrix):
    "each AUC as a percentage of the best AUC on its dataset"
    best = auc.values.max(axis=0)
    assert np.all(best > 0), "dataset column with zero maximum AUC"
    return auc.values / best * 100.0


class Verdict(str, Enum):
    keep = "keep"
    invert = "invert"
    exclude = "exclude"


@dataclass(frozen=True)
class DatasetDiagnosis:
    max_auc: float
    min_auc: float
    verdict: Verdict


def diagnose_dataset(auc_column) -> DatasetDiagnosis:
    """
    exclude when every algorithm is near chance, invert when none does
    clearly better than chance but some do clearly worse
    """
    column = np.asarray(auc_column, dtype=np.float64)
    if column.size == 0:
        raise ValueError("cannot diagnose an empty AUC column")
    hi, lo = float(column.max()), float(column.min())
    if lo >= EXCLUDE_LOW and hi <= EXCLUDE_HIGH:
        verdict = Verdict.exclude
    elif hi <= EXCLUDE_HIGH and lo < EXCLUDE_LOW:
        verdict = Verdict.invert
    else:
        verdict = Verdict.keep
    return DatasetDiagnosis(hi, lo, verdict)
