"""
run orchestration: the run configuration, manifest ingestion and the
benchmark loop that fills the AUC matrix
"""
import logging
import platform
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy

from . import __version__, evaluation, isolation, registry
from .app import (
    AUC_MATRIX_FILE,
    DEFAULT_REPEATS,
    DEFAULT_SEED,
    GRID_DETAIL_FILE,
    PREPROCESS_DIR,
    RUN_METADATA_FILE,
    default_threads,
)
from .datamodel import AucMatrix, Dataset, DatasetError, read_csv, validate_dataset
from .evaluation import DatasetDiagnosis, GridResult, TaskFailed, Verdict
from .expansion import expand_config
from .preprocess import preprocess
from .utils import MASK64, dump_json, parallel_map, write_json

logger = logging.getLogger(__name__)

MANIFEST_KEYS = {"name", "path", "invert_labels", "exclude", "anomalies"}

DECISIONS = {
    "grid": "every grid point scored on all data, AUCs averaged per dataset",
    "point_seed": "master seed XOR sha256(algorithm, dataset, grid point, repeat)",
    "ecod": "max of left, right and skewness-selected tail sums, ECDF over n, "
    "ties in the max broken by the skewness-selected sum",
    "copod": "per variable max of the skewness-selected tail and the mean of "
    "both tails, ECDF over n + 1, summed over variables",
    "inne_subsample": isolation.INNE_SUBSAMPLE,
    "isolation_trees": isolation.N_TREES,
    "quartiles": "linear interpolation at position p * (n - 1)",
    "gaps": "datasets with a failed grid point are left out of the matrix",
}


def _algorithm_list(value):
    if isinstance(value, str):
        value = value.split(",")
    return tuple(str(a).strip() for a in value if str(a).strip())


@dataclass(frozen=True)
class RunConfig:
    manifest: Path
    out: Path
    algorithms: Tuple[str, ...] = registry.ALGORITHMS
    seed: int = DEFAULT_SEED
    threads: int = 1
    repeats: int = DEFAULT_REPEATS
    apply_diagnostics: bool = False
    keep_going: bool = False
    dotenv: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "manifest", Path(self.manifest))
        object.__setattr__(self, "out", Path(self.out))
        object.__setattr__(self, "algorithms", _algorithm_list(self.algorithms))
        if not self.algorithms:
            raise ValueError("algorithms: empty selection")
        for algorithm in self.algorithms:
            if algorithm not in registry.DETECTORS:
                raise ValueError(
                    f"algorithms: unknown algorithm {algorithm!r}, "
                    f"known: {', '.join(registry.ALGORITHMS)}"
                )
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError(f"algorithms: duplicate entry in {self.algorithms}")
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError(f"seed: must be an unsigned 64-bit int, got {self.seed}")
        if int(self.repeats) < 1:
            raise ValueError(f"repeats: must be >= 1, got {self.repeats}")
        if int(self.threads) < 1:
            raise ValueError(f"threads: must be >= 1, got {self.threads}")

    @classmethod
    def resolve(cls, config=None, dotenv=None, **flags):
        """
        merge explicit flags over a config file over the environment; flags
        that are None count as not given

        :param config: optional yaml/jsonnet/json file with the same keys
        :param dotenv: dotenv file overriding the config's own `dotenv` key
        """
        values = {}
        if config is not None:
            loaded = expand_config(config, dotenv)
            if not isinstance(loaded, dict):
                raise ValueError(f"{config}: run configuration must be a mapping")
            base = Path(config).parent
            for key, value in loaded.items():
                name = key.replace("-", "_")
                if name not in cls.__dataclass_fields__ or name == "dotenv":
                    raise ValueError(f"{config}: unknown configuration key {key!r}")
                if name in ("manifest", "out"):
                    value = base / value
                values[name] = value
        values.update({k: v for k, v in flags.items() if v is not None})
        if dotenv is not None:
            values["dotenv"] = dotenv
        if "threads" not in values:
            values["threads"] = default_threads()
        for key in ("manifest", "out"):
            if key not in values:
                raise ValueError(f"{key}: required, pass --{key} or set it in config")
        return cls(**values)


def _manifest_entries(path, dotenv):
    manifest = expand_config(path, dotenv)
    if isinstance(manifest, dict):
        manifest = manifest.get("datasets")
    if not isinstance(manifest, list):
        raise DatasetError(f"{path}: manifest must be a list of dataset entries")
    entries = []
    for i, entry in enumerate(manifest):
        if isinstance(entry, str):
            entry = {"path": entry}
        if not isinstance(entry, dict) or "path" not in entry:
            raise DatasetError(f"{path}: entry {i} has no path")
        unknown = set(entry) - MANIFEST_KEYS
        if unknown:
            raise DatasetError(f"{path}: entry {i} has unknown keys {sorted(unknown)}")
        entry = dict(entry)
        entry.setdefault("name", Path(entry["path"]).stem)
        entries.append(entry)
    names = [e["name"] for e in entries]
    duplicate = next((n for n in names if names.count(n) > 1), None)
    if duplicate is not None:
        raise DatasetError(f"{path}: dataset name {duplicate!r} listed twice")
    return entries


def load_entry(entry, base: Path, out: Optional[Path] = None) -> Dataset:
    "ingest, validate and preprocess one manifest entry"
    name = entry["name"]
    csv_path = base / entry["path"]
    if not csv_path.is_file():
        raise DatasetError(f"{name}: file not found: {csv_path}")
    raw = read_csv(
        csv_path,
        name=name,
        invert_labels=bool(entry.get("invert_labels", False)),
        exclude=bool(entry.get("exclude", False)),
    )
    dataset = validate_dataset(raw, expected_anomalies=entry.get("anomalies"))
    dataset.require_labels()
    if dataset.n_anomalies == 0:
        raise DatasetError(f"{name}: labels contain no anomaly")
    dataset, report = preprocess(dataset)
    meta = {
        **dataset.meta,
        "raw_samples": len(raw.features),
        "duplicates_removed": report.duplicates_removed,
        "variables_removed": len(report.columns_dropped),
        "invert_labels": dataset.invert_labels,
        "exclude": dataset.exclude,
    }
    dataset = replace(dataset, meta=meta)
    if out is not None:
        write_json(
            out / PREPROCESS_DIR / f"{name}.json",
            {**dataset.summary(), **report.to_dict()},
        )
    logger.info(
        "loaded %s: %d samples, %d variables, %d anomalies",
        name,
        dataset.n,
        dataset.d,
        dataset.n_anomalies,
    )
    return dataset


def load_manifest(
    path, out=None, dotenv=None, keep_going=False, errors: Optional[List] = None
) -> List[Dataset]:
    """
    every manifest entry ingested, validated and preprocessed; CSV paths are
    relative to the manifest. With keep_going a failing entry is logged,
    appended to `errors` and skipped.
    """
    path = Path(path)
    out = Path(out) if out is not None else None
    datasets = []
    for entry in _manifest_entries(path, dotenv):
        try:
            datasets.append(load_entry(entry, path.parent, out))
        except ValueError as e:
            if not keep_going:
                raise
            logger.error("skipping dataset %s: %s", entry["name"], e)
            if errors is not None:
                errors.append({"dataset": entry["name"], "error": str(e)})
    return datasets


@dataclass
class BenchmarkRun:
    auc: AucMatrix
    grid: List[GridResult]
    gaps: List[TaskFailed] = field(default_factory=list)
    diagnoses: Dict[str, DatasetDiagnosis] = field(default_factory=dict)
    load_errors: List[Dict] = field(default_factory=list)

    @property
    def complete(self):
        return not self.gaps and not self.load_errors


def _dataset_tasks(dataset: Dataset, config: RunConfig):
    "every grid point of every selected algorithm on one dataset"
    # the pool parallelizes over grid points, scorers stay single threaded
    ctx = registry.ScoringContext(dataset.features, threads=1)
    tasks = [
        (algorithm, spec)
        for algorithm in config.algorithms
        for spec in registry.expand_grid(algorithm)
    ]

    def run(task):
        _, spec = task
        try:
            return evaluation.evaluate_point(
                spec, dataset, ctx, config.seed, config.repeats
            )
        except TaskFailed as e:
            logger.warning("%s", e)
            return e

    outcomes = parallel_map(run, tasks, config.threads)
    results, gaps = {}, []
    for algorithm in config.algorithms:
        points = [
            (spec.label(), outcome)
            for (alg, spec), outcome in zip(tasks, outcomes)
            if alg == algorithm
        ]
        failed = [o for _, o in points if isinstance(o, TaskFailed)]
        if failed:
            gaps.extend(failed)
            continue
        results[algorithm] = GridResult.from_points(algorithm, dataset.name, points)
        logger.info(
            "%s on %s: mean AUC %.4f",
            algorithm,
            dataset.name,
            results[algorithm].mean,
        )
    return results, gaps


def _inverted(result: GridResult):
    return GridResult.from_points(
        result.algorithm,
        result.dataset,
        [(label, 1.0 - auc) for label, auc in result.points],
    )


def run_benchmark(config: RunConfig) -> BenchmarkRun:
    """
    grid-averaged AUC of every selected algorithm on every dataset that is
    not excluded, written to the output directory
    """
    out = config.out
    load_errors = []
    datasets = load_manifest(
        config.manifest, out, config.dotenv, config.keep_going, load_errors
    )
    datasets = [d for d in datasets if not d.exclude]
    per_dataset = {}
    gaps = []
    for dataset in datasets:
        results, failed = _dataset_tasks(dataset, config)
        per_dataset[dataset.name] = results
        gaps.extend(failed)

    diagnoses = {}
    kept = []
    for dataset in datasets:
        results = per_dataset[dataset.name]
        if len(results) != len(config.algorithms):
            logger.warning("leaving %s out of the matrix, it has gaps", dataset.name)
            continue
        diagnosis = evaluation.diagnose_dataset([r.mean for r in results.values()])
        diagnoses[dataset.name] = diagnosis
        if config.apply_diagnostics and diagnosis.verdict == Verdict.exclude:
            logger.info("excluding %s, every algorithm is near chance", dataset.name)
            continue
        if config.apply_diagnostics and diagnosis.verdict == Verdict.invert:
            logger.info("inverting the labels of %s", dataset.name)
            per_dataset[dataset.name] = {
                a: _inverted(r) for a, r in results.items()
            }
        kept.append(dataset.name)

    values = np.array(
        [[per_dataset[d][a].mean for d in kept] for a in config.algorithms]
    ).reshape(len(config.algorithms), len(kept))
    auc = AucMatrix(config.algorithms, tuple(kept), values)
    grid = [
        per_dataset[d.name][a]
        for a in config.algorithms
        for d in datasets
        if a in per_dataset[d.name]
    ]
    run = BenchmarkRun(auc, grid, gaps, diagnoses, load_errors)
    write_run(run, config, datasets)
    return run


def run_metadata(run: BenchmarkRun, config: RunConfig, datasets):
    return {
        "seed": int(config.seed),
        "repeats": int(config.repeats),
        "algorithms": list(config.algorithms),
        "apply_diagnostics": config.apply_diagnostics,
        "datasets": [d.summary() for d in datasets],
        "versions": {
            "odbench": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "decisions": DECISIONS,
        "diagnostics": {
            name: {
                "max_auc": d.max_auc,
                "min_auc": d.min_auc,
                "verdict": d.verdict.value,
            }
            for name, d in run.diagnoses.items()
        },
        "gaps": [g.to_dict() for g in run.gaps],
        "load_errors": run.load_errors,
    }


def write_run(run: BenchmarkRun, config: RunConfig, datasets):
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    (out / AUC_MATRIX_FILE).write_text(run.auc.to_csv())
    (out / GRID_DETAIL_FILE).write_text(dump_json([g.to_dict() for g in run.grid]))
    write_json(out / RUN_METADATA_FILE, run_metadata(run, config, datasets))
    logger.info(
        "wrote %s: %d algorithms x %d datasets, %d gaps",
        out / AUC_MATRIX_FILE,
        len(run.auc.algorithms),
        len(run.auc.datasets),
        len(run.gaps),
    )
