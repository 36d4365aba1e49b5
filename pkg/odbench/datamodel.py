"""
core datatypes shared by every module, plus dataset validation and the CSV
interchange format
"""
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

LABEL_COLUMN = "label"


class DatasetError(ValueError):
    pass


class DetectorError(RuntimeError):
    pass


def _frozen(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    name: str
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    invert_labels: bool = False
    exclude: bool = False
    feature_names: Tuple[str, ...] = ()
    meta: Dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def n_anomalies(self):
        return None if self.labels is None else int(self.labels.sum())

    def require_labels(self):
        if self.labels is None:
            raise DatasetError(f"dataset {self.name} has no labels")
        return self.labels

    def evaluation_labels(self):
        "labels as evaluated, inverted when the manifest asks for it"
        labels = self.require_labels()
        return 1 - labels if self.invert_labels else labels

    def with_rows(self, features, keep=None):
        labels = self.labels
        if labels is not None and keep is not None:
            labels = _frozen(np.array(labels[keep]))
        return replace(self, features=_frozen(np.array(features)), labels=labels)

    def summary(self):
        "the per-dataset columns of the study's dataset table"
        out = {"name": self.name, "samples": self.n, "variables": self.d}
        if self.labels is not None:
            out["anomalies"] = self.n_anomalies
            out["anomaly_percentage"] = round(100.0 * self.n_anomalies / self.n, 2)
        out.update(self.meta)
        return out


@dataclass(frozen=True)
class DetectorSpec:
    algorithm: str
    params: Tuple[Tuple[str, object], ...] = ()

    @classmethod
    def of(cls, algorithm, **params):
        return cls(algorithm, tuple(sorted(params.items())))

    @property
    def kwargs(self):
        return dict(self.params)

    def label(self):
        if not self.params:
            return self.algorithm
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.algorithm}({inner})"


# anomaly scores are plain float64 vectors, higher = more anomalous
ScoreVector = np.ndarray


def check_scores(values, source="detector"):
    values = np.asarray(values, dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"{source} produced a non-finite score at sample {bad[0]}")
    return values


@dataclass(frozen=True)
class AucMatrix:
    algorithms: Tuple[str, ...]
    datasets: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        assert values.shape == (len(self.algorithms), len(self.datasets)), (
            f"auc matrix shape {values.shape} does not match "
            f"{len(self.algorithms)} algorithms x {len(self.datasets)} datasets"
        )
        assert np.all(np.isfinite(values)), "auc matrix has missing entries"
        assert np.all((values >= 0) & (values <= 1)), "auc outside [0, 1]"
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "values", _frozen(values))

    def row(self, algorithm):
        return self.values[self.algorithms.index(algorithm)]

    def column(self, dataset):
        return self.values[:, self.datasets.index(dataset)]

    def mean_auc(self):
        return self.values.mean(axis=1)

    def select(self, algorithms=None, datasets=None):
        algorithms = tuple(self.algorithms if algorithms is None else algorithms)
        datasets = tuple(self.datasets if datasets is None else datasets)
        rows = np.array([self.algorithms.index(a) for a in algorithms], dtype=int)
        cols = np.array([self.datasets.index(d) for d in datasets], dtype=int)
        return AucMatrix(algorithms, datasets, self.values[np.ix_(rows, cols)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.values,
            index=pd.Index(self.algorithms, name="algorithm"),
            columns=list(self.datasets),
        )

    def to_csv(self, digits=6):
        return self.to_frame().to_csv(float_format=f"%.{digits}f", lineterminator="\n")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame):
        return cls(
            tuple(str(a) for a in frame.index),
            tuple(str(d) for d in frame.columns),
            frame.to_numpy(dtype=np.float64),
        )

    @classmethod
    def from_csv(cls, text):
        return cls.read(io.StringIO(text))

    @classmethod
    def read(cls, path_or_buffer):
        frame = pd.read_csv(path_or_buffer, index_col=0, float_precision="round_trip")
        return cls.from_frame(frame)


@dataclass(frozen=True)
class RankSummary:
    algorithms: Tuple[str, ...]
    mean_ranks: np.ndarray
    iman_davenport: Optional[float]
    nemenyi_p: np.ndarray

    def __post_init__(self):
        p = self.nemenyi_p
        assert np.allclose(p, p.T), "nemenyi p-values must be symmetric"
        assert np.all(np.diag(p) == 1.0), "nemenyi diagonal must be 1"

    def mean_rank_map(self) -> Dict[str, float]:
        return {a: float(r) for a, r in zip(self.algorithms, self.mean_ranks)}


def validate_dataset(raw: Dataset, expected_anomalies=None) -> Dataset:
    """
    check the dataset invariants and normalize labels to {0, 1}

    :param raw: dataset whose features may still be a list of parsed rows
    :param expected_anomalies: anomaly count from manifest metadata, if any
    """
    rows = raw.features
    if not isinstance(rows, np.ndarray):
        rows = list(rows)
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            first = len(rows[0])
            bad = next(i for i, r in enumerate(rows) if len(r) != first)
            raise DatasetError(
                f"{raw.name}: ragged rows, row {bad} has {len(rows[bad])} "
                f"values, expected {first}"
            )
    try:
        features = np.array(rows, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DatasetError(f"{raw.name}: unparseable feature value ({e})")
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    if features.ndim != 2 or features.shape[1] < 1:
        raise DatasetError(f"{raw.name}: expected a 2D feature matrix")
    bad = np.argwhere(~np.isfinite(features))
    if bad.size:
        r, c = bad[0]
        raise DatasetError(f"{raw.name}: non-finite value at ({r},{c})")
    n = features.shape[0]
    if n < 2:
        raise DatasetError(f"{raw.name}: need at least 2 samples, got {n}")

    labels = None
    if raw.labels is not None:
        labels = _normalize_labels(raw.name, raw.labels)
        if labels.shape[0] != n:
            raise DatasetError(
                f"{raw.name}: {labels.shape[0]} labels for {n} samples"
            )
        if not np.any(labels == 0):
            raise DatasetError(f"{raw.name}: labels contain no normal sample")
        if expected_anomalies is not None and labels.sum() != expected_anomalies:
            raise DatasetError(
                f"{raw.name}: {int(labels.sum())} anomalies, manifest says "
                f"{expected_anomalies}"
            )
        labels = _frozen(labels)

    return replace(raw, features=_frozen(features), labels=labels)


def _normalize_labels(name, labels):
    out = np.empty(len(labels), dtype=np.int64)
    for i, value in enumerate(labels):
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise DatasetError(f"{name}: label outside {{0,1}} at row {i}: {value!r}")
        if number not in (0.0, 1.0):
            raise DatasetError(f"{name}: label outside {{0,1}} at row {i}: {value!r}")
        out[i] = int(number)
    return out


def read_csv(path, name=None, **flags) -> Dataset:
    "parse the CSV interchange format, validation is left to validate_dataset"
    path = Path(path)
    try:
        # cells stay text so floats parse exactly and gaps show up as ""
        frame = pd.read_csv(path, dtype=str, na_filter=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"{path}: empty file")
    except pd.errors.ParserError as e:
        raise DatasetError(f"{path}: ragged rows ({e})")
    frame = frame.fillna("")
    frame.columns = [str(c).strip() for c in frame.columns]
    width = frame.shape[1]
    filled = frame.apply(lambda column: column.str.strip() != "").sum(axis=1)
    short = np.flatnonzero(filled.to_numpy() < width)
    if short.size:
        i = int(short[0])
        raise DatasetError(
            f"{path}: ragged rows, row {i} has {filled.iloc[i]} values, "
            f"expected {width}"
        )
    labels = None
    if width and frame.columns[-1] == LABEL_COLUMN:
        labels = frame.pop(LABEL_COLUMN).str.strip().tolist()
    try:
        features = frame.astype(np.float64).to_numpy()
    except ValueError as e:
        raise DatasetError(f"{path}: malformed CSV ({e})")
    return Dataset(
        name=name or path.stem,
        features=features,
        labels=labels,
        feature_names=tuple(frame.columns),
        **flags,
    )


def to_frame(dataset: Dataset) -> pd.DataFrame:
    names = list(dataset.feature_names) or [f"x{j}" for j in range(dataset.d)]
    frame = pd.DataFrame(dataset.features, columns=names)
    if dataset.labels is not None:
        frame[LABEL_COLUMN] = np.asarray(dataset.labels, dtype=np.int64)
    return frame


def to_csv_text(dataset: Dataset) -> str:
    "floats are written in their shortest round-trip form"
    return to_frame(dataset).to_csv(index=False, lineterminator="\n")


def write_csv(dataset: Dataset, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_csv_text(dataset))

