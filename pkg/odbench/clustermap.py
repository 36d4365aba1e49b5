"""
two-way average-linkage clustering of the AUC matrix with optimally ordered
leaves, the two-cluster cut that separates local from global datasets, and a
plain SVG rendering of the clustered heatmap

Merges follow the linkage-matrix convention: leaves are nodes 0..n-1 and
merge i creates node n + i.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .datamodel import AucMatrix

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    merges: Tuple[Merge, ...]
    labels: Tuple[str, ...]

    def __post_init__(self):
        assert len(self.merges) == len(self.labels) - 1

    @property
    def n_leaves(self):
        return len(self.labels)

    @property
    def root(self):
        return 2 * self.n_leaves - 2

    def children(self, node):
        if node < self.n_leaves:
            return None
        m = self.merges[node - self.n_leaves]
        return m.left, m.right

    def leaves(self, node) -> List[int]:
        out, stack = [], [node]
        while stack:
            v = stack.pop()
            kids = self.children(v)
            if kids is None:
                out.append(v)
            else:
                stack.extend(reversed(kids))
        return out

    def to_dict(self, order=None, cut=None):
        out = {
            "labels": list(self.labels),
            "merges": [
                {"left": m.left, "right": m.right, "height": m.height, "size": m.size}
                for m in self.merges
            ],
        }
        if order is not None:
            out["order"] = [self.labels[i] for i in order]
        if cut is not None:
            out["clusters"] = [sorted(c) for c in cut]
        return out


def pearson_distance_matrix(rows, labels=None):
    "1 - pearson correlation between every pair of rows"
    rows = np.asarray(rows, dtype=np.float64)
    flat = np.flatnonzero(rows.std(axis=1) == 0)
    if flat.size:
        name = labels[flat[0]] if labels is not None else f"row {flat[0]}"
        raise ValueError(f"zero-variance row: {name}")
    D = 1.0 - np.corrcoef(rows)
    D = np.clip((D + D.T) / 2.0, 0.0, 2.0)
    np.fill_diagonal(D, 0.0)
    return D


def average_linkage(dist, labels=None) -> Dendrogram:
    """
    UPGMA on a distance matrix; the distance between clusters is the mean of
    their cross-pair distances, the lexicographically smallest pair of node
    ids merges first on ties
    """
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 leaves, got {n}")
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
    # cross-pair distance sums between active clusters
    sums = {(i, j): dist[i, j] for i in range(n) for j in range(i + 1, n)}
    size = {i: 1 for i in range(n)}
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        best, best_pair = np.inf, None
        for a_pos, a in enumerate(active):
            for b in active[a_pos + 1 :]:
                value = sums[(a, b)] / (size[a] * size[b])
                if value < best - TIE_TOLERANCE:
                    best, best_pair = value, (a, b)
        a, b = best_pair
        new = n + step
        active.remove(a)
        active.remove(b)
        for c in active:
            key_a = (min(a, c), max(a, c))
            key_b = (min(b, c), max(b, c))
            sums[(c, new)] = sums.pop(key_a) + sums.pop(key_b)
        del sums[(a, b)]
        size[new] = size[a] + size[b]
        active.append(new)
        merges.append(Merge(a, b, float(best), size[new]))
    return Dendrogram(tuple(merges), labels)


def two_cluster_cut(dend: Dendrogram):
    "leaf label sets of the two subtrees joined by the final merge"
    left, right = dend.children(dend.root)
    return (
        {dend.labels[i] for i in dend.leaves(left)},
        {dend.labels[i] for i in dend.leaves(right)},
    )


def order_cost(order, dist):
    return float(sum(dist[a, b] for a, b in zip(order[:-1], order[1:])))


def optimal_leaf_order(dend: Dendrogram, dist) -> List[int]:
    """
    leaf permutation reachable by flipping subtrees that minimizes the sum of
    distances between neighboring leaves
    """
    dist = np.asarray(dist, dtype=np.float64)
    n = dend.n_leaves
    # cost[v][i, j]: best order of v's subtree running from leaf i to leaf j
    cost = {}
    members = {}

    def solve(v):
        kids = dend.children(v)
        if kids is None:
            members[v] = [v]
            cost[v] = np.full((n, n), np.inf)
            cost[v][v, v] = 0.0
            return
        left, right = kids
        solve(left)
        solve(right)
        L, R = members[left], members[right]
        M = np.full((n, n), np.inf)
        inner = dist[np.ix_(L, R)]
        for i in L:
            # best cost of reaching m in R when the left part starts at i
            reach = np.min(cost[left][i, L][:, None] + inner, axis=0)
            for j in R:
                M[i, j] = np.min(reach + cost[right][R, j])
                M[j, i] = M[i, j]
        members[v] = L + R
        cost[v] = M

    solve(dend.root)

    def rebuild(v, i, j):
        "leaves of v from i to j"
        kids = dend.children(v)
        if kids is None:
            return [v]
        left, right = kids
        L, R = members[left], members[right]
        if i not in L:
            return list(reversed(rebuild(v, j, i)))
        target = cost[v][i, j]
        for h in sorted(L):
            for m in sorted(R):
                value = cost[left][i, h] + dist[h, m] + cost[right][m, j]
                if value <= target + TIE_TOLERANCE:
                    return rebuild(left, i, h) + rebuild(right, m, j)
        raise AssertionError("leaf ordering backtrack failed")

    root = cost[dend.root]
    best = np.min(root)
    for i in range(n):
        for j in range(n):
            if root[i, j] <= best + TIE_TOLERANCE:
                return rebuild(dend.root, i, j)
    raise AssertionError("no finite leaf ordering")


def is_consistent(order, dend: Dendrogram):
    "every subtree occupies a contiguous run of the order"
    position = {leaf: p for p, leaf in enumerate(order)}
    for node in range(dend.n_leaves, dend.root + 1):
        spots = sorted(position[leaf] for leaf in dend.leaves(node))
        if spots[-1] - spots[0] != len(spots) - 1:
            return False
    return True


@dataclass(frozen=True)
class ClusterMap:
    auc: AucMatrix
    algorithms: Dendrogram
    datasets: Dendrogram
    algorithm_order: Tuple[int, ...]
    dataset_order: Tuple[int, ...]
    dataset_cut: Tuple[frozenset, frozenset]

    def cluster_of(self, dataset):
        return next(c for c in self.dataset_cut if dataset in c)


def cluster_auc(auc: AucMatrix) -> ClusterMap:
    "independent clusterings of the algorithm rows and the dataset columns"
    row_dist = pearson_distance_matrix(auc.values, auc.algorithms)
    col_dist = pearson_distance_matrix(auc.values.T, auc.datasets)
    rows = average_linkage(row_dist, auc.algorithms)
    cols = average_linkage(col_dist, auc.datasets)
    cut = two_cluster_cut(cols)
    logger.info("dataset clusters of size %d and %d", len(cut[0]), len(cut[1]))
    return ClusterMap(
        auc=auc,
        algorithms=rows,
        datasets=cols,
        algorithm_order=tuple(optimal_leaf_order(rows, row_dist)),
        dataset_order=tuple(optimal_leaf_order(cols, col_dist)),
        dataset_cut=(frozenset(cut[0]), frozenset(cut[1])),
    )


# svg


COLORS = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37))
CELL = 14
TREE = 80
LABEL = 110


def color(value, lo, hi):
    t = 0.0 if hi == lo else (value - lo) / (hi - lo)
    t = min(max(t, 0.0), 1.0) * (len(COLORS) - 1)
    i = min(int(t), len(COLORS) - 2)
    f = t - i
    rgb = [round(a + (b - a) * f) for a, b in zip(COLORS[i], COLORS[i + 1])]
    return "#%02x%02x%02x" % tuple(rgb)


def _tree_lines(dend: Dendrogram, order: Sequence[int]):
    """
    dendrogram segments in (leaf axis, height axis) coordinates, leaf axis in
    cells and height scaled to [0, 1] with the root at 1
    """
    position = {leaf: p + 0.5 for p, leaf in enumerate(order)}
    top = max((m.height for m in dend.merges), default=1.0) or 1.0
    height = {leaf: 0.0 for leaf in order}
    lines = []
    for step, m in enumerate(dend.merges):
        node = dend.n_leaves + step
        h = m.height / top
        a, b = position[m.left], position[m.right]
        lines.append((a, height[m.left], a, h))
        lines.append((b, height[m.right], b, h))
        lines.append((a, h, b, h))
        position[node] = (a + b) / 2
        height[node] = h
    return lines


def render_svg(cmap: ClusterMap) -> str:
    rows = [cmap.auc.algorithms[i] for i in cmap.algorithm_order]
    cols = [cmap.auc.datasets[j] for j in cmap.dataset_order]
    values = cmap.auc.values[np.ix_(cmap.algorithm_order, cmap.dataset_order)]
    lo, hi = float(values.min()), float(values.max())
    x0, y0 = TREE + LABEL, TREE
    width = x0 + CELL * len(cols) + 10
    height = y0 + CELL * len(rows) + LABEL
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="9">'
    ]
    for r, row in enumerate(values):
        for c, value in enumerate(row):
            out.append(
                f'<rect x="{x0 + c * CELL}" y="{y0 + r * CELL}" width="{CELL}" '
                f'height="{CELL}" fill="{color(value, lo, hi)}">'
                f"<title>{rows[r]} / {cols[c]}: {value:.3f}</title></rect>"
            )
    for r, name in enumerate(rows):
        y = y0 + r * CELL + CELL * 0.7
        out.append(f'<text x="{TREE + 4}" y="{y:.1f}">{name}</text>')
    for c, name in enumerate(cols):
        x = x0 + c * CELL + CELL * 0.7
        y = y0 + len(rows) * CELL + 4
        out.append(
            f'<text x="{x:.1f}" y="{y}" transform="rotate(90 {x:.1f} {y})">'
            f"{name}</text>"
        )
    for a, ha, b, hb in _tree_lines(cmap.datasets, cmap.dataset_order):
        out.append(
            f'<line x1="{x0 + a * CELL:.1f}" y1="{TREE * (1 - ha):.1f}" '
            f'x2="{x0 + b * CELL:.1f}" y2="{TREE * (1 - hb):.1f}" stroke="black"/>'
        )
    for a, ha, b, hb in _tree_lines(cmap.algorithms, cmap.algorithm_order):
        out.append(
            f'<line x1="{TREE * (1 - ha):.1f}" y1="{y0 + a * CELL:.1f}" '
            f'x2="{TREE * (1 - hb):.1f}" y2="{y0 + b * CELL:.1f}" stroke="black"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
