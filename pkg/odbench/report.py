"""
artifacts computed from a finished run: percent-of-max boxplots, the rank
statistics files and the clustermap
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from . import rankstats
from .app import (
    AUC_MATRIX_FILE,
    BOXPLOT_FILE,
    BOXPLOT_SVG_FILE,
    CLUSTERMAP_FILE,
    DENDROGRAM_ALGORITHMS_FILE,
    DENDROGRAM_DATASETS_FILE,
    NEMENYI_FILE,
    PERCENT_OF_MAX_FILE,
    RANKS_FILE,
    SIGNIFICANCE_FILE,
    STATS_FILE,
)
from .clustermap import ClusterMap, cluster_auc, render_svg
from .datamodel import AucMatrix
from .evaluation import percent_of_max
from .preprocess import quartiles
from .utils import format_float, write_json

logger = logging.getLogger(__name__)

WHISKER = 1.5
FORMATS = ("csv", "svg")
SUBSET_ANCHORS = {"local": "pen-local", "global": "pen-global"}


@dataclass(frozen=True)
class BoxStats:
    algorithm: str
    mean_auc: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    fliers: Tuple[float, ...]

    @classmethod
    def of(cls, algorithm, values, mean_auc):
        "whiskers reach the most extreme points within 1.5 IQR of the quartiles"
        values = np.asarray(values, dtype=np.float64)
        q1, q3 = quartiles(values)
        reach = WHISKER * (q3 - q1)
        inside = (values >= q1 - reach) & (values <= q3 + reach)
        return cls(
            algorithm=algorithm,
            mean_auc=float(mean_auc),
            median=float(np.median(values)),
            q1=float(q1),
            q3=float(q3),
            whisker_low=float(values[inside].min()),
            whisker_high=float(values[inside].max()),
            fliers=tuple(float(v) for v in np.sort(values[~inside])),
        )


def boxplot_stats(auc: AucMatrix) -> List[BoxStats]:
    "percent-of-max box per algorithm, best mean AUC first"
    relative = percent_of_max(auc)
    mean = auc.mean_auc()
    boxes = [
        BoxStats.of(name, relative[i], mean[i]) for i, name in enumerate(auc.algorithms)
    ]
    return sorted(boxes, key=lambda b: (-b.mean_auc, b.algorithm))


def boxplot_csv(boxes: List[BoxStats]) -> str:
    frame = pd.DataFrame(
        [
            {
                "algorithm": b.algorithm,
                "mean_auc": b.mean_auc,
                "median": b.median,
                "q1": b.q1,
                "q3": b.q3,
                "whisker_low": b.whisker_low,
                "whisker_high": b.whisker_high,
                "fliers": ";".join(format_float(v) for v in b.fliers),
            }
            for b in boxes
        ]
    )
    return frame.to_csv(index=False, float_format="%.6f", lineterminator="\n")


def algorithm_frame(values, algorithms, columns) -> pd.DataFrame:
    return pd.DataFrame(
        values, index=pd.Index(algorithms, name="algorithm"), columns=list(columns)
    )


def percent_of_max_csv(auc: AucMatrix) -> str:
    frame = algorithm_frame(percent_of_max(auc), auc.algorithms, auc.datasets)
    return frame.to_csv(float_format="%.4f", lineterminator="\n")


def render_boxplot_svg(boxes: List[BoxStats]) -> str:
    "horizontal boxes on a 0-100 percent-of-max axis"
    row, label, scale = 16, 110, 4.0
    width = label + int(100 * scale) + 20
    height = row * len(boxes) + 30

    def x(value):
        return label + value * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="9">'
    ]
    for i, b in enumerate(boxes):
        mid = 10 + i * row + row / 2
        out.append(f'<text x="4" y="{mid + 3:.1f}">{b.algorithm}</text>')
        out.append(
            f'<line x1="{x(b.whisker_low):.1f}" y1="{mid:.1f}" '
            f'x2="{x(b.whisker_high):.1f}" y2="{mid:.1f}" stroke="black"/>'
        )
        out.append(
            f'<rect x="{x(b.q1):.1f}" y="{mid - 5:.1f}" '
            f'width="{(b.q3 - b.q1) * scale:.1f}" height="10" '
            f'fill="#21918c" stroke="black"/>'
        )
        out.append(
            f'<line x1="{x(b.median):.1f}" y1="{mid - 5:.1f}" '
            f'x2="{x(b.median):.1f}" y2="{mid + 5:.1f}" stroke="white"/>'
        )
        for v in b.fliers:
            out.append(f'<circle cx="{x(v):.1f}" cy="{mid:.1f}" r="1.5"/>')
    axis = 10 + row * len(boxes) + 12
    for tick in range(0, 101, 20):
        out.append(f'<text x="{x(tick) - 6:.1f}" y="{axis}">{tick}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def select_subset(auc: AucMatrix, subset: Optional[str]) -> AucMatrix:
    """
    restrict to the local or global dataset cluster of the two-cluster cut,
    named after the cluster holding pen-local or pen-global
    """
    if subset is None:
        return auc
    if subset not in SUBSET_ANCHORS:
        raise ValueError(f"subset must be one of {sorted(SUBSET_ANCHORS)}: {subset}")
    anchor = SUBSET_ANCHORS[subset]
    if anchor not in auc.datasets:
        raise ValueError(f"subset {subset} needs dataset {anchor} in the matrix")
    members = cluster_auc(auc).cluster_of(anchor)
    return auc.select(datasets=[d for d in auc.datasets if d in members])


def ranks_csv(ranks: rankstats.FriedmanRanks, auc: AucMatrix) -> str:
    frame = algorithm_frame(
        np.column_stack([ranks.mean_ranks, auc.mean_auc()]),
        ranks.algorithms,
        ("mean_rank", "mean_auc"),
    )
    return frame.to_csv(float_format="%.6f", lineterminator="\n")


def nemenyi_csv(p, algorithms) -> str:
    "unclamped p-values in shortest round-trip form"
    frame = algorithm_frame(np.asarray(p, dtype=np.float64), algorithms, algorithms)
    return frame.to_csv(lineterminator="\n")


def pvalue_text(p, algorithms) -> str:
    "pairwise p-values clamped to [0.001, 0.9] for reading"
    shown = rankstats.clamp_for_display(np.asarray(p))
    width = max(len(a) for a in algorithms)
    lines = [" " * width + " " + " ".join(a.rjust(max(len(a), 5)) for a in algorithms)]
    for name, row in zip(algorithms, shown):
        cells = [
            f"{v:.3f}".rjust(max(len(a), 5)) for v, a in zip(row, algorithms)
        ]
        lines.append(name.ljust(width) + " " + " ".join(cells))
    return "\n".join(lines) + "\n"


def write_stats(auc: AucMatrix, out, subset=None):
    """
    ranks.csv, nemenyi.csv, significance.txt and stats.json for the matrix
    or one of its dataset clusters
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    auc = select_subset(auc, subset)
    ranks, summary, table, stats = rankstats.full_statistics(auc)
    p = summary.nemenyi_p
    stats["subset"] = subset or "all"
    stats["wins"] = {a: table.wins(a, strong_only=True) for a in table.rows}
    (out / RANKS_FILE).write_text(ranks_csv(ranks, auc))
    (out / NEMENYI_FILE).write_text(nemenyi_csv(p, auc.algorithms))
    (out / SIGNIFICANCE_FILE).write_text(
        table.to_text() + "\n" + pvalue_text(p, auc.algorithms)
    )
    write_json(out / STATS_FILE, stats)
    logger.info(
        "statistics over %d algorithms x %d datasets written to %s",
        len(auc.algorithms),
        len(auc.datasets),
        out,
    )
    return table, stats


def write_clustermap(auc: AucMatrix, out, svg=True) -> ClusterMap:
    out = Path(out)
    cmap = cluster_auc(auc)
    write_json(
        out / DENDROGRAM_ALGORITHMS_FILE,
        cmap.algorithms.to_dict(order=cmap.algorithm_order),
    )
    write_json(
        out / DENDROGRAM_DATASETS_FILE,
        cmap.datasets.to_dict(order=cmap.dataset_order, cut=cmap.dataset_cut),
    )
    if svg:
        (out / CLUSTERMAP_FILE).write_text(render_svg(cmap))
    return cmap


def emit_report(results_dir, fmt="csv") -> List[Path]:
    """
    boxplot data and the significance table for a finished run; the svg
    format adds the boxplot and clustermap drawings
    """
    results_dir = Path(results_dir)
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {', '.join(FORMATS)}: {fmt}")
    source = results_dir / AUC_MATRIX_FILE
    if not source.is_file():
        raise FileNotFoundError(f"no results to report on, missing {source}")
    auc = AucMatrix.read(source)
    if not auc.datasets:
        raise ValueError(f"{source} holds no complete dataset column")
    boxes = boxplot_stats(auc)
    written = [results_dir / PERCENT_OF_MAX_FILE, results_dir / BOXPLOT_FILE]
    written[0].write_text(percent_of_max_csv(auc))
    written[1].write_text(boxplot_csv(boxes))
    if len(auc.algorithms) >= 2 and len(auc.datasets) >= 2:
        write_stats(auc, results_dir)
        written.append(results_dir / SIGNIFICANCE_FILE)
    else:
        logger.warning("significance table needs at least 2 x 2 results, skipped")
    if fmt == "svg":
        (results_dir / BOXPLOT_SVG_FILE).write_text(render_boxplot_svg(boxes))
        written.append(results_dir / BOXPLOT_SVG_FILE)
        try:
            write_clustermap(auc, results_dir)
            written.append(results_dir / CLUSTERMAP_FILE)
        except ValueError as e:
            logger.warning("clustermap skipped: %s", e)
    for path in written:
        logger.info("wrote %s", path)
    return written
