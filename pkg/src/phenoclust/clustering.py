"""Feature matrices, average-linkage clustering and cluster-count selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DISCARDED, Dataset, FeatureSetKind, Partition
from .errors import (
    EmptyDataset,
    FewerThanTwoPoints,
    KOutOfRange,
    NoSurvivingClusters,
    TooFewMeals,
    UndefinedForK,
)

GRAM_COLUMNS = ("carbs_g", "fiber_g", "protein_g", "fat_g")
PCT_COLUMNS = ("pct_carbs", "pct_protein", "pct_fat", "fiber_g")

FEATURE_COLUMNS = {
    FeatureSetKind.GRAMS_ONLY: GRAM_COLUMNS,
    FeatureSetKind.PCT_CALORIES_ONLY: PCT_COLUMNS,
    FeatureSetKind.BG_WITH_GRAMS: GRAM_COLUMNS + ("bg_change",),
    FeatureSetKind.BG_WITH_PCT_CALORIES: PCT_COLUMNS + ("bg_change",),
}

DEFAULT_K_MAX = 12
DEFAULT_MIN_SIZE = 5


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    feature_names: tuple[str, ...]
    values: np.ndarray
    scaled: bool = False
    kind: FeatureSetKind | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.feature_names):
            raise ValueError("values must be n_rows x len(feature_names)")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]


def build_feature_matrix(dataset: Dataset, kind: FeatureSetKind) -> FeatureMatrix:
    if dataset is None or len(dataset) == 0:
        raise EmptyDataset("cannot build features for an empty dataset")
    kind = FeatureSetKind(kind)
    names = FEATURE_COLUMNS[kind]
    values = np.column_stack([dataset.column(name) for name in names])
    return FeatureMatrix(names, values, scaled=False, kind=kind)


def min_max_scale(m: FeatureMatrix) -> FeatureMatrix:
    """Scale every column onto [0, 1]; constant columns become zeros."""
    values = m.values
    lo = values.min(axis=0)
    span = values.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (values - lo) / safe, 0.0)
    return FeatureMatrix(m.feature_names, scaled, scaled=True, kind=m.kind)


def pairwise_distances(m: FeatureMatrix | np.ndarray) -> np.ndarray:
    x = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    # exact symmetry regardless of summation order
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class MergeTree:
    """Agglomeration history.

    Leaves are nodes ``0..n-1``; the node created by merge step ``s`` has id
    ``n + s``. Within a merge, ``left`` is the smaller node id.
    """

    n_leaves: int
    merges: tuple[Merge, ...]

    @property
    def heights(self) -> np.ndarray:
        return np.array([mg.height for mg in self.merges], dtype=float)

    @property
    def root(self) -> int:
        return self.n_leaves + len(self.merges) - 1 if self.merges else 0

    def children(self, node: int) -> tuple[int, int] | None:
        if node < self.n_leaves:
            return None
        mg = self.merges[node - self.n_leaves]
        return mg.left, mg.right

    def node_height(self, node: int) -> float:
        return 0.0 if node < self.n_leaves else self.merges[node - self.n_leaves].height

    def leaves(self, node: int) -> list[int]:
        """Leaf ids under ``node`` in dendrogram (left-first) order."""
        out, stack = [], [node]
        while stack:
            cur = stack.pop()
            kids = self.children(cur)
            if kids is None:
                out.append(cur)
            else:
                stack.append(kids[1])
                stack.append(kids[0])
        return out

    def leaf_order(self) -> list[int]:
        return self.leaves(self.root) if self.merges else list(range(self.n_leaves))


def agglomerate(d) -> MergeTree:
    """Unweighted average-linkage (UPGMA) clustering of a distance matrix.

    Cluster distances follow the Lance-Williams update
    ``d(k, i+j) = (n_i d(k, i) + n_j d(k, j)) / (n_i + n_j)``. Ties between
    equal minimum distances go to the lexicographically smallest
    ``(smaller node id, larger node id)`` pair.
    """
    dist = np.array(d, dtype=float)
    n = dist.shape[0]
    if dist.ndim != 2 or dist.shape[1] != n:
        raise ValueError("distance matrix must be square")
    if n < 2:
        raise FewerThanTwoPoints(f"need at least 2 points to cluster, got {n}")

    np.fill_diagonal(dist, np.inf)
    node_ids = np.arange(n)
    sizes = np.ones(n, dtype=np.int64)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    merges = []
    for step in range(n - 1):
        dmin = dist.min()
        rows, cols = np.nonzero((dist == dmin) & upper)
        if len(rows) == 1:
            i, j = rows[0], cols[0]
        else:
            a, b = node_ids[rows], node_ids[cols]
            pick = np.lexsort((np.maximum(a, b), np.minimum(a, b)))[0]
            i, j = rows[pick], cols[pick]
        ni, nj = sizes[i], sizes[j]
        left, right = sorted((int(node_ids[i]), int(node_ids[j])))
        merges.append(Merge(left, right, float(dmin), int(ni + nj)))

        merged = (ni * dist[i] + nj * dist[j]) / (ni + nj)
        dist[i, :] = merged
        dist[:, i] = merged
        dist[i, i] = np.inf
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        node_ids[i] = n + step
        sizes[i] = ni + nj
    return MergeTree(n, tuple(merges))


def cut_tree(t: MergeTree, k: int) -> Partition:
    """Partition from undoing the last ``k - 1`` merges.

    Blocks are labeled ``1..k`` in order of their smallest leaf index.
    """
    n = t.n_leaves
    if not 1 <= k <= n:
        raise KOutOfRange(f"k must be in 1..{n}, got {k}")
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    rep = {}  # node id -> any leaf under it
    for leaf in range(n):
        rep[leaf] = leaf
    for s, mg in enumerate(t.merges[: n - k]):
        a, b = find(rep[mg.left]), find(rep[mg.right])
        parent[max(a, b)] = min(a, b)
        rep[n + s] = min(a, b)

    roots = [find(i) for i in range(n)]
    labels, next_label = {}, 1
    out = []
    for r in roots:
        if r not in labels:
            labels[r] = next_label
            next_label += 1
        out.append(labels[r])
    return Partition(out)


def _sums_of_squares(x: np.ndarray, labels: np.ndarray) -> tuple[float, float, float]:
    grand = x.mean(axis=0)
    total = float(((x - grand) ** 2).sum())
    between = within = 0.0
    for label in np.unique(labels):
        block = x[labels == label]
        centroid = block.mean(axis=0)
        between += len(block) * float(((centroid - grand) ** 2).sum())
        within += float(((block - centroid) ** 2).sum())
    return between, within, total


def _ordinary_rows(m: FeatureMatrix, p: Partition) -> tuple[np.ndarray, np.ndarray]:
    if len(p) != m.n_rows:
        raise ValueError("partition and feature matrix sizes differ")
    labels = p.as_array()
    keep = labels > 0
    return m.values[keep], labels[keep]


def ch_index(m: FeatureMatrix, p: Partition) -> float:
    """Calinski-Harabasz index ``(B/(k-1)) / (W/(n-k))`` over ordinary clusters.

    Returns ``math.inf`` when clusters are perfectly tight (``W == 0``) but
    distinct, and ``0.0`` when every point coincides.
    """
    x, labels = _ordinary_rows(m, p)
    n, k = len(labels), len(np.unique(labels))
    if not 2 <= k <= n - 1:
        raise UndefinedForK(f"CH index undefined for k={k} with n={n}")
    between, within, _ = _sums_of_squares(x, labels)
    return _ch_value(between, within, n, k)


def _ch_value(between: float, within: float, n: int, k: int) -> float:
    if within == 0.0:
        return math.inf if between > 0.0 else 0.0
    return (between / (k - 1)) / (within / (n - k))


@dataclass(frozen=True)
class CHStats:
    ks: tuple[int, ...]
    between: tuple[float, ...]
    within: tuple[float, ...]
    total: float
    ch: tuple[float, ...]

    @property
    def best_k(self) -> int:
        best = max(self.ch)
        return self.ks[self.ch.index(best)]

    def to_json(self) -> dict:
        return {
            "k": list(self.ks),
            "between_ss": list(self.between),
            "within_ss": list(self.within),
            "total_ss": self.total,
            "ch": [c if math.isfinite(c) else "Infinity" for c in self.ch],
            "best_k": self.best_k,
        }


def ch_curve(m: FeatureMatrix, t: MergeTree, k_max: int = DEFAULT_K_MAX) -> CHStats:
    n = t.n_leaves
    if n < 3:
        raise TooFewMeals(f"need at least 3 meals to select k, got {n}")
    if m.n_rows != n:
        raise ValueError("tree and feature matrix sizes differ")
    ks, between, within, ch = [], [], [], []
    total = None
    for k in range(2, min(k_max, n - 1) + 1):
        labels = cut_tree(t, k).as_array()
        b, w, tot = _sums_of_squares(m.values, labels)
        total = tot
        ks.append(k)
        between.append(b)
        within.append(w)
        ch.append(_ch_value(b, w, n, k))
    if not ks:
        raise KOutOfRange(f"k_max must be at least 2, got {k_max}")
    return CHStats(tuple(ks), tuple(between), tuple(within), total, tuple(ch))


def select_k(m: FeatureMatrix, t: MergeTree, k_max: int = DEFAULT_K_MAX) -> tuple[int, CHStats]:
    """Cluster count maximizing CH over ``2..min(k_max, n-1)``; smallest k wins ties."""
    stats = ch_curve(m, t, k_max)
    return stats.best_k, stats


def filter_small_clusters(p: Partition, min_size: int = DEFAULT_MIN_SIZE) -> Partition:
    """Relabel clusters smaller than ``min_size`` as DISCARDED.

    Surviving clusters keep their relative order and are renumbered ``1..``.
    """
    blocks = p.block_index
    survivors = [label for label in p.clusters if len(blocks[label]) >= min_size]
    mapping = {label: i + 1 for i, label in enumerate(survivors)}
    return Partition(mapping.get(x, DISCARDED) if x > 0 else x for x in p.labels)


@dataclass(frozen=True)
class ClusterMeans:
    feature_names: tuple[str, ...]
    labels: tuple[int, ...]
    sizes: tuple[int, ...]
    means: np.ndarray  # one row per cluster

    def to_json(self) -> list[dict]:
        return [
            {"cluster": label, "size": size, "mean": dict(zip(self.feature_names, map(float, row)))}
            for label, size, row in zip(self.labels, self.sizes, self.means)
        ]


def cluster_means(m: FeatureMatrix, p: Partition) -> ClusterMeans:
    if len(p) != m.n_rows:
        raise ValueError("partition and feature matrix sizes differ")
    clusters = p.clusters
    if not clusters:
        raise NoSurvivingClusters("no clusters left after filtering")
    labels = p.as_array()
    rows, sizes = [], []
    for label in clusters:
        block = m.values[labels == label]
        rows.append(block.mean(axis=0))
        sizes.append(len(block))
    return ClusterMeans(m.feature_names, tuple(clusters), tuple(sizes), np.array(rows))


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    kind: FeatureSetKind
    raw: FeatureMatrix
    scaled: FeatureMatrix
    tree: MergeTree
    k: int
    ch: CHStats | None
    partition: Partition
    filtered: Partition
    config: dict = field(default_factory=dict)

    @property
    def means(self) -> ClusterMeans:
        return cluster_means(self.raw, self.filtered)


def cluster_dataset(
    dataset: Dataset,
    kind: FeatureSetKind,
    k: int | None = None,
    k_max: int = DEFAULT_K_MAX,
    min_size: int = DEFAULT_MIN_SIZE,
) -> ClusteringResult:
    """Build, scale, cluster, cut and filter one feature set of a dataset."""
    raw = build_feature_matrix(dataset, kind)
    scaled = min_max_scale(raw)
    if k is not None and not 1 <= k <= raw.n_rows:
        raise KOutOfRange(f"k must be in 1..{raw.n_rows}, got {k}")
    tree = agglomerate(pairwise_distances(scaled))
    stats = None
    if raw.n_rows >= 3 and k_max >= 2:
        stats = ch_curve(scaled, tree, k_max)
    elif k is None:
        raise TooFewMeals(f"need at least 3 meals to select k, got {raw.n_rows}")
    chosen = stats.best_k if k is None else k
    partition = cut_tree(tree, chosen)
    return ClusteringResult(
        kind=FeatureSetKind(kind),
        raw=raw,
        scaled=scaled,
        tree=tree,
        k=chosen,
        ch=stats,
        partition=partition,
        filtered=filter_small_clusters(partition, min_size),
        config={"k": k, "k_max": k_max, "min_size": min_size},
    )
