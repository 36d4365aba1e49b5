import os
from pathlib import Path

THREADS_ENV = "ODBENCH_THREADS"
DATA_ENV = "ODBENCH_DATA"

DEFAULT_SEED = 0
DEFAULT_REPEATS = 5

AUC_MATRIX_FILE = "auc_matrix.csv"
GRID_DETAIL_FILE = "grid_detail.json"
RUN_METADATA_FILE = "run_metadata.json"
PREPROCESS_DIR = "preprocess"
RANKS_FILE = "ranks.csv"
NEMENYI_FILE = "nemenyi.csv"
SIGNIFICANCE_FILE = "significance.txt"
STATS_FILE = "stats.json"
DENDROGRAM_ALGORITHMS_FILE = "dendrogram_algorithms.json"
DENDROGRAM_DATASETS_FILE = "dendrogram_datasets.json"
CLUSTERMAP_FILE = "clustermap.svg"
BOXPLOT_FILE = "boxplot.csv"
BOXPLOT_SVG_FILE = "boxplot.svg"
PERCENT_OF_MAX_FILE = "percent_of_max.csv"


def default_threads():
    "worker count from ODBENCH_THREADS, falling back to the cpu count"
    value = os.environ.get(THREADS_ENV)
    if value:
        threads = int(value)
        if threads < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {value}")
        return threads
    return os.cpu_count() or 1


DATA_DIR = Path(__file__).parent / "data"
APPENDIX_AUC = DATA_DIR / "appendix_auc.csv"
APPENDIX_NEMENYI = DATA_DIR / "appendix_nemenyi.csv"
