"""
Friedman ranks, the Iman-Davenport omnibus statistic, Nemenyi post-hoc
p-values and the significance summary table
"""
import io
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy import stats
from scipy.optimize import brentq
from scipy.special import ndtr
from scipy.stats import rankdata

from .datamodel import AucMatrix, RankSummary

logger = logging.getLogger(__name__)

SR_TOLERANCE = 1e-6
SR_NODES = 20
SR_LIMIT = 9.0
DISPLAY_MIN = 0.001
DISPLAY_MAX = 0.9
STRONG = 0.05
WEAK = 0.10


class StatisticSaturated(ArithmeticError):
    pass


@dataclass(frozen=True)
class FriedmanRanks:
    algorithms: Tuple[str, ...]
    datasets: Tuple[str, ...]
    ranks: np.ndarray

    @property
    def k(self):
        return self.ranks.shape[0]

    @property
    def n_datasets(self):
        return self.ranks.shape[1]

    @property
    def mean_ranks(self):
        return self.ranks.mean(axis=1)


def friedman_ranks(auc: AucMatrix) -> FriedmanRanks:
    "rank 1 is the highest AUC on a dataset, ties get the average rank"
    k, n = auc.values.shape
    if k < 2 or n < 2:
        raise ValueError(f"need at least 2 algorithms and 2 datasets, got {k}x{n}")
    ranks = np.column_stack([rankdata(-auc.values[:, j]) for j in range(n)])
    assert np.allclose(ranks.sum(axis=0), k * (k + 1) / 2.0, rtol=0, atol=1e-9)
    return FriedmanRanks(auc.algorithms, auc.datasets, ranks)


def friedman_chi2(ranks: FriedmanRanks, n_datasets=None):
    k = ranks.k
    n = n_datasets or ranks.n_datasets
    mean = ranks.mean_ranks
    return 12.0 * n / (k * (k + 1)) * (np.sum(mean**2) - k * (k + 1) ** 2 / 4.0)


def iman_davenport(ranks: FriedmanRanks, n_datasets=None):
    "F-distributed correction of the Friedman chi-square"
    k = ranks.k
    n = n_datasets or ranks.n_datasets
    chi2 = friedman_chi2(ranks, n)
    denominator = n * (k - 1) - chi2
    if denominator <= 0:
        raise StatisticSaturated(
            f"Iman-Davenport statistic saturated: chi2={chi2} reaches N(k-1)"
        )
    return float((n - 1) * chi2 / denominator)


def f_degrees(k, n):
    return k - 1, (k - 1) * (n - 1)


def f_critical(k, n, alpha=STRONG):
    return float(stats.f.ppf(1 - alpha, *f_degrees(k, n)))


def f_pvalue(statistic, k, n):
    return float(stats.f.sf(statistic, *f_degrees(k, n)))


def _sr_integral(q, k, panels):
    "composite Gauss-Legendre over [-SR_LIMIT, SR_LIMIT] for every q at once"
    nodes, weights = np.polynomial.legendre.leggauss(SR_NODES)
    edges = np.linspace(-SR_LIMIT, SR_LIMIT, panels + 1)
    half = (edges[1:] - edges[:-1]) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    z = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    phi = np.exp(-0.5 * z**2) / np.sqrt(2 * np.pi)
    inner = np.clip(ndtr(z[None, :]) - ndtr(z[None, :] - q[:, None]), 0, 1)
    return k * (inner ** (k - 1) * phi[None, :]) @ w


def studentized_range_cdf(q, k):
    """
    P(range of k standard normals < q), infinite degrees of freedom;
    panels are doubled until two refinements agree to SR_TOLERANCE
    """
    q = np.atleast_1d(np.asarray(q, dtype=np.float64))
    out = np.zeros(q.shape)
    positive = q > 0
    if not positive.any():
        return out
    panels = 8
    previous = _sr_integral(q[positive], k, panels)
    while True:
        panels *= 2
        current = _sr_integral(q[positive], k, panels)
        if np.max(np.abs(current - previous)) < SR_TOLERANCE / 10 or panels > 4096:
            break
        previous = current
    out[positive] = np.clip(current, 0.0, 1.0)
    return out


def studentized_range_quantile(p, k):
    return brentq(lambda q: studentized_range_cdf(q, k)[0] - p, 1e-6, 20.0, xtol=1e-9)


def nemenyi_scale(k, n):
    return np.sqrt(k * (k + 1) / (12.0 * n))


def nemenyi_pairwise(ranks: FriedmanRanks, n_datasets=None):
    "symmetric matrix of two-sided Nemenyi p-values, unit diagonal"
    k = ranks.k
    n = n_datasets or ranks.n_datasets
    mean = ranks.mean_ranks
    q = np.abs(mean[:, None] - mean[None, :]) / nemenyi_scale(k, n)
    iu = np.triu_indices(k, 1)
    p = np.ones((k, k))
    upper = 1.0 - studentized_range_cdf(q[iu], k)
    p[iu] = upper
    p[(iu[1], iu[0])] = upper
    return np.clip(p, 0.0, 1.0)


def critical_difference(k, n, alpha=STRONG):
    "smallest mean-rank gap Nemenyi calls significant at alpha"
    return float(studentized_range_quantile(1 - alpha, k) * nemenyi_scale(k, n))


def clamp_for_display(p):
    return np.clip(p, DISPLAY_MIN, DISPLAY_MAX)


def marker(p, row_better):
    if p <= STRONG:
        return "++" if row_better else "--"
    if p <= WEAK:
        return "+" if row_better else "-"
    return ""


@dataclass(frozen=True)
class SummaryTable:
    rows: Tuple[str, ...]
    columns: Tuple[str, ...]
    cells: Tuple[Tuple[str, ...], ...]
    mean_auc: Dict[str, float]

    def row_markers(self, algorithm) -> List[str]:
        return list(self.cells[self.rows.index(algorithm)])

    def wins(self, algorithm, strong_only=False):
        "number of columns this row outperforms"
        accepted = ("++",) if strong_only else ("++", "+")
        return sum(m in accepted for m in self.row_markers(algorithm))

    def to_text(self):
        width = max([len(r) for r in self.rows] + [8])
        buf = io.StringIO()
        header = [" " * width] + [c.rjust(max(len(c), 2)) for c in self.columns]
        buf.write(" ".join(header + ["mean AUC"]) + "\n")
        for name, cells in zip(self.rows, self.cells):
            line = [name.ljust(width)]
            line += [m.rjust(max(len(c), 2)) for m, c in zip(cells, self.columns)]
            line.append(f"{self.mean_auc[name]:.3f}".rjust(8))
            buf.write(" ".join(line).rstrip() + "\n")
        return buf.getvalue()


def significance_table(
    p, mean_auc, mean_ranks, algorithms
) -> SummaryTable:
    """
    pairwise markers, ++/+ where the row algorithm has the better mean rank
    at p <= 0.05/0.10 and --/- where it has the worse one; rows by descending
    mean AUC, columns ascending, only columns some row outperforms
    """
    p = np.asarray(p)
    assert np.allclose(p, p.T), "p-value matrix must be symmetric"
    algorithms = list(algorithms)
    mean_auc = np.asarray(mean_auc, dtype=np.float64)
    mean_ranks = np.asarray(mean_ranks, dtype=np.float64)
    down = sorted(range(len(algorithms)), key=lambda i: (-mean_auc[i], algorithms[i]))
    up = sorted(range(len(algorithms)), key=lambda i: (mean_auc[i], algorithms[i]))

    def cell(i, j):
        if i == j or mean_ranks[i] == mean_ranks[j]:
            return ""
        return marker(p[i, j], mean_ranks[i] < mean_ranks[j])

    beaten = [j for j in up if any(cell(i, j) in ("++", "+") for i in down)]
    return SummaryTable(
        rows=tuple(algorithms[i] for i in down),
        columns=tuple(algorithms[j] for j in beaten),
        cells=tuple(tuple(cell(i, j) for j in beaten) for i in down),
        mean_auc={a: float(v) for a, v in zip(algorithms, mean_auc)},
    )


def full_statistics(auc: AucMatrix):
    """
    everything the stats command reports: ranks, omnibus test with its
    critical value, pairwise p-values, critical differences and the table;
    returns (ranks, RankSummary, SummaryTable, stats dict)
    """
    ranks = friedman_ranks(auc)
    k, n = ranks.k, ranks.n_datasets
    p = nemenyi_pairwise(ranks)
    out = {
        "algorithms": k,
        "datasets": n,
        "friedman_chi2": float(friedman_chi2(ranks)),
        "f_degrees_of_freedom": list(f_degrees(k, n)),
        "f_critical_0.05": f_critical(k, n),
        "critical_difference_0.05": critical_difference(k, n, STRONG),
        "critical_difference_0.10": critical_difference(k, n, WEAK),
    }
    try:
        statistic = iman_davenport(ranks)
        out["iman_davenport_p"] = f_pvalue(statistic, k, n)
    except StatisticSaturated as e:
        logger.warning("%s", e)
        statistic = None
        out["iman_davenport_p"] = 0.0
    out["iman_davenport"] = statistic
    summary = RankSummary(ranks.algorithms, ranks.mean_ranks, statistic, p)
    out["mean_ranks"] = summary.mean_rank_map()
    table = significance_table(p, auc.mean_auc(), ranks.mean_ranks, auc.algorithms)
    return ranks, summary, table, out
