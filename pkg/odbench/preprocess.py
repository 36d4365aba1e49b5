import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .datamodel import Dataset

logger = logging.getLogger(__name__)


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessReport:
    duplicates_removed: int
    columns_dropped: Tuple[int, ...]
    medians: np.ndarray
    iqrs: np.ndarray

    def __post_init__(self):
        assert np.all(self.iqrs > 0), "retained columns must have positive IQR"

    def to_dict(self):
        return {
            "duplicates_removed": self.duplicates_removed,
            "columns_dropped": list(self.columns_dropped),
            "medians": [float(v) for v in self.medians],
            "iqrs": [float(v) for v in self.iqrs],
        }


def quartiles(x, axis=0):
    "Q1 and Q3 with linear interpolation at position p*(n-1)"
    q1, q3 = np.percentile(x, [25, 75], axis=axis, method="linear")
    return q1, q3


def dedupe_rows(X):
    """
    drop exact duplicate rows keeping the first occurrence

    returns (deduplicated matrix, removed count, kept indices)
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return X, 0, []
    # bitwise row identity, -0.0 and 0.0 differ as in the raw file
    width = X.dtype.itemsize * X.shape[1]
    rows = np.ascontiguousarray(X).view(np.dtype((np.void, width)))
    _, first = np.unique(rows.ravel(), return_index=True)
    kept = np.sort(first)
    return X[kept], int(X.shape[0] - kept.size), kept.tolist()


def robust_scale(X):
    """
    center each column on its median and divide by its IQR, dropping
    columns whose IQR is zero
    """
    X = np.asarray(X, dtype=np.float64)
    medians = np.median(X, axis=0)
    q1, q3 = quartiles(X)
    iqrs = q3 - q1
    keep = iqrs > 0
    dropped = tuple(int(j) for j in np.flatnonzero(~keep))
    if not keep.any():
        raise PreprocessError("no informative variables")
    scaled = (X[:, keep] - medians[keep]) / iqrs[keep]
    report = PreprocessReport(
        duplicates_removed=0,
        columns_dropped=dropped,
        medians=medians[keep],
        iqrs=iqrs[keep],
    )
    return scaled, report


def preprocess(dataset: Dataset):
    "dedupe, then robust scale; labels follow the kept rows"
    X, removed, kept = dedupe_rows(dataset.features)
    scaled, report = robust_scale(X)
    if report.columns_dropped:
        # rows that only differed in a dropped column are duplicates now
        scaled, again, second = dedupe_rows(scaled)
        removed += again
        kept = [kept[i] for i in second]
    report = PreprocessReport(
        duplicates_removed=removed,
        columns_dropped=report.columns_dropped,
        medians=report.medians,
        iqrs=report.iqrs,
    )
    out = dataset.with_rows(scaled, keep=np.asarray(kept))
    if dataset.feature_names:
        names = tuple(
            name
            for j, name in enumerate(dataset.feature_names)
            if j not in report.columns_dropped
        )
        out = replace(out, feature_names=names)
    if out.n < 2:
        raise PreprocessError(
            f"{dataset.name}: {out.n} distinct samples left after removing duplicates"
        )
    logger.debug(
        "%s: %d duplicates removed, %d columns dropped",
        dataset.name,
        removed,
        len(report.columns_dropped),
    )
    return out, report
