"""Comparing discovered clusters with expert observations."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .clustering import DEFAULT_K_MAX, DEFAULT_MIN_SIZE, cluster_dataset
from .core import DISCARDED, UNMATCHED, Dataset, FeatureSetKind, Partition
from .errors import MismatchedElements, NoSurvivingClusters, PhenoclustError, TooFewMeals
from .goldstandard import GoldStandard, ObservationStats, gold_standard_report

DEFAULT_REPLICATES = 1000
DEFAULT_ALPHA = 0.05


class AssignmentPolicy(str, enum.Enum):
    FIRST_MATCH = "first-match"
    MOST_SPECIFIC = "most-specific"


def _stats_for(gs: GoldStandard, dataset: Dataset, stats=None) -> tuple[ObservationStats, ...]:
    if stats is None:
        stats = gold_standard_report(gs, dataset).observations
    return tuple(stats)


def observations_to_partition(
    gs: GoldStandard,
    dataset: Dataset,
    policy: AssignmentPolicy = AssignmentPolicy.MOST_SPECIFIC,
    stats=None,
) -> Partition:
    """One block per observation (label = 1-based file position), rest UNMATCHED.

    A meal supporting several observations goes to the first one in file order
    (FIRST_MATCH) or to the one with the fewest supporting meals
    (MOST_SPECIFIC, ties broken by file order).
    """
    policy = AssignmentPolicy(policy)
    stats = _stats_for(gs, dataset, stats)
    order = list(range(len(stats)))
    if policy is AssignmentPolicy.MOST_SPECIFIC:
        order.sort(key=lambda i: (stats[i].support_count, i))
    labels = [UNMATCHED] * len(dataset)
    for i in reversed(order):
        for meal in stats[i].support:
            labels[meal] = i + 1
    return Partition(labels)


def _comb2(x: np.ndarray | int):
    return x * (x - 1) // 2


def contingency(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise MismatchedElements(f"partitions cover {len(a)} and {len(b)} elements")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max(initial=-1) + 1, bi.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def ari_from_table(table: np.ndarray) -> float:
    """Hubert-Arabie adjusted Rand index from a contingency table.

    Pair counts are exact integers; when the index is undefined (max index
    equals expected index) the result is 1 if both partitions group the
    elements identically and 0 otherwise.
    """
    n = int(table.sum())
    sum_ij = int(_comb2(table).sum())
    sum_a = int(_comb2(table.sum(axis=1)).sum())
    sum_b = int(_comb2(table.sum(axis=0)).sum())
    pairs = n * (n - 1) // 2
    if pairs == 0:
        return 1.0
    # scale by 2*pairs to stay in integers: E*2P = 2*sum_a*sum_b, M*2P = P*(sum_a+sum_b)
    expected2 = 2 * sum_a * sum_b
    maximum2 = pairs * (sum_a + sum_b)
    if maximum2 == expected2:
        same = sum_ij == sum_a == sum_b
        return 1.0 if same else 0.0
    return (2 * pairs * sum_ij - expected2) / (maximum2 - expected2)


def adjusted_rand_index(p: Partition, q: Partition) -> float:
    if len(p) != len(q):
        raise MismatchedElements(f"partitions cover {len(p)} and {len(q)} elements")
    return ari_from_table(contingency(p.labels, q.labels))


def drop_special(p: Partition, q: Partition) -> tuple[Partition, Partition, list[int]]:
    """Restrict both partitions to meals that are neither DISCARDED nor UNMATCHED in either."""
    if len(p) != len(q):
        raise MismatchedElements(f"partitions cover {len(p)} and {len(q)} elements")
    special = (DISCARDED, UNMATCHED)
    keep = [i for i, (a, b) in enumerate(zip(p.labels, q.labels)) if a not in special and b not in special]
    return Partition(p.labels[i] for i in keep), Partition(q.labels[i] for i in keep), keep


@dataclass(frozen=True)
class AriResult:
    ari: float
    ci_low: float
    ci_high: float
    bootstrap_replicates: int
    seed: int
    alpha: float = DEFAULT_ALPHA
    degenerate_replicates: int = 0
    n_elements: int = 0

    @property
    def ci_contains_point(self) -> bool:
        return self.ci_low <= self.ari <= self.ci_high

    def formatted(self, digits: int = 3) -> str:
        """Table cell layout, e.g. ``0.495 (0.215-0.763)``."""
        f = f"{{:.{digits}f}}"
        return f"{f.format(self.ari)} ({f.format(self.ci_low)}-{f.format(self.ci_high)})"

    def to_json(self) -> dict:
        return {
            "ari": self.ari,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "ci_contains_point": self.ci_contains_point,
            "bootstrap_replicates": self.bootstrap_replicates,
            "degenerate_replicates": self.degenerate_replicates,
            "alpha": self.alpha,
            "seed": self.seed,
            "n_elements": self.n_elements,
            "formatted": self.formatted(),
        }


def _replicate(a: np.ndarray, b: np.ndarray, seed: int, index: int) -> tuple[float, bool]:
    n = len(a)
    picks = rng.integers(rng.derive_key(seed, index), n, n)
    ra, rb = a[picks], b[picks]
    degenerate = bool(np.all(ra == ra[0]) or np.all(rb == rb[0]))
    return ari_from_table(contingency(ra, rb)), degenerate


def bootstrap_ari_ci(
    p: Partition,
    q: Partition,
    replicates: int = DEFAULT_REPLICATES,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    workers: int = 1,
) -> AriResult:
    """Point ARI with a percentile bootstrap confidence interval.

    Each replicate resamples the ``n`` elements with replacement; replicate
    ``b`` draws from the stream keyed by ``(seed, b)``, so the result does not
    depend on ``workers``.
    """
    if len(p) != len(q):
        raise MismatchedElements(f"partitions cover {len(p)} and {len(q)} elements")
    if replicates < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if len(p) == 0:
        raise MismatchedElements("partitions are empty")
    a, b = p.as_array(), q.as_array()
    point = adjusted_rand_index(p, q)

    def run(index):
        return _replicate(a, b, seed, index)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(replicates)))
    else:
        results = [run(i) for i in range(replicates)]
    values = np.array([r[0] for r in results])
    degenerate = sum(r[1] for r in results)
    lo, hi = np.quantile(values, [alpha / 2, 1 - alpha / 2], method="linear")
    return AriResult(
        ari=point,
        ci_low=float(lo),
        ci_high=float(hi),
        bootstrap_replicates=replicates,
        seed=seed,
        alpha=alpha,
        degenerate_replicates=int(degenerate),
        n_elements=len(p),
    )


def compare_partitions(
    clusters: Partition,
    observed: Partition,
    exclude_unmatched: bool = False,
    replicates: int = DEFAULT_REPLICATES,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    workers: int = 1,
) -> AriResult:
    if exclude_unmatched:
        clusters, observed, _ = drop_special(clusters, observed)
        if len(clusters) == 0:
            raise MismatchedElements("no meals left after excluding unmatched/discarded meals")
    return bootstrap_ari_ci(clusters, observed, replicates, alpha, seed, workers)


# ---------------------------------------------------------------- feature sets


@dataclass
class FeatureSetResult:
    kind: FeatureSetKind
    ari: AriResult | None = None
    k: int | None = None
    surviving_clusters: int | None = None
    error: str | None = None
    best: bool = False

    def to_json(self) -> dict:
        return {
            "feature_set": self.kind.value,
            "label": self.kind.label,
            "ari": self.ari.to_json() if self.ari else None,
            "k": self.k,
            "surviving_clusters": self.surviving_clusters,
            "error": self.error,
            "best": self.best,
        }


def select_feature_set(
    dataset: Dataset,
    gs: GoldStandard,
    policy: AssignmentPolicy = AssignmentPolicy.MOST_SPECIFIC,
    *,
    k_max: int = DEFAULT_K_MAX,
    min_size: int = DEFAULT_MIN_SIZE,
    replicates: int = DEFAULT_REPLICATES,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    exclude_unmatched: bool = False,
    workers: int = 1,
) -> list[FeatureSetResult]:
    """Cluster with each feature set and rank by ARI against the observations.

    Failed feature sets stay in the table with their error and sort last.
    """
    if len(dataset) < 6:
        raise TooFewMeals(f"feature-set selection needs at least 6 meals, got {len(dataset)}")
    observed = observations_to_partition(gs, dataset, policy)
    results = []
    for kind in FeatureSetKind:
        row = FeatureSetResult(kind)
        try:
            clustering = cluster_dataset(dataset, kind, k_max=k_max, min_size=min_size)
            row.k = clustering.k
            row.surviving_clusters = clustering.filtered.n_clusters
            row.ari = compare_partitions(
                clustering.filtered, observed, exclude_unmatched, replicates, alpha, seed, workers
            )
        except PhenoclustError as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        results.append(row)
    ranked = sorted(
        results,
        key=lambda r: (r.ari is None, -(r.ari.ari if r.ari else 0.0)),
    )
    if ranked and ranked[0].ari is not None:
        ranked[0].best = True
    return ranked


# ---------------------------------------------------------------- rediscovery


@dataclass(frozen=True)
class ObservationRediscovery:
    obs_id: str
    support_count: int
    whole: bool
    whole_cluster: int | None
    partial: bool
    partial_cluster: int | None

    def to_json(self) -> dict:
        return {
            "obs_id": self.obs_id,
            "support_count": self.support_count,
            "whole_rediscovered": self.whole,
            "whole_cluster": self.whole_cluster,
            "partial_rediscovered": self.partial,
            "partial_cluster": self.partial_cluster,
        }


@dataclass(frozen=True)
class RediscoveryReport:
    clusters: tuple[int, ...]
    cluster_sizes: tuple[int, ...]
    obs_ids: tuple[str, ...]
    alignment: np.ndarray  # clusters x observations
    any_observation: tuple[float, ...]
    observations: tuple[ObservationRediscovery, ...]
    whole_meal_frac: float = field(default=0.0)

    @property
    def n_whole(self) -> int:
        return sum(o.whole for o in self.observations)

    @property
    def n_partial(self) -> int:
        return sum(o.partial for o in self.observations)

    def to_json(self) -> dict:
        return {
            "n_whole_rediscovered": self.n_whole,
            "n_partial_rediscovered": self.n_partial,
            "whole_rediscovered_meal_frac": self.whole_meal_frac,
            "observations": [o.to_json() for o in self.observations],
            "alignment": [
                {
                    "cluster": c,
                    "size": size,
                    "fractions": dict(zip(self.obs_ids, map(float, row))),
                    "any_observation": any_obs,
                }
                for c, size, row, any_obs in zip(
                    self.clusters, self.cluster_sizes, self.alignment, self.any_observation
                )
            ],
        }


def rediscovery_report(
    p: Partition, gs: GoldStandard, dataset: Dataset, stats=None
) -> RediscoveryReport:
    """Whole and partial rediscovery of each observation by the clusters of ``p``.

    Whole: the observation's meals make up at least half of some cluster.
    Partial: more than half of the observation's meals fall in one cluster.
    """
    if len(p) != len(dataset):
        raise MismatchedElements("partition and dataset sizes differ")
    stats = _stats_for(gs, dataset, stats)
    clusters = p.clusters
    if not clusters:
        raise NoSurvivingClusters("no clusters left after filtering")
    members = [p.members(c) for c in clusters]
    sizes = [len(m) for m in members]
    alignment = np.zeros((len(clusters), len(stats)))
    overlaps = np.zeros((len(clusters), len(stats)), dtype=np.int64)
    for j, s in enumerate(stats):
        for i, block in enumerate(members):
            overlaps[i, j] = len(s.support & block)
            alignment[i, j] = overlaps[i, j] / sizes[i]
    supported = frozenset().union(*(s.support for s in stats))
    any_obs = tuple(len(block & supported) / len(block) for block in members)

    rows = []
    whole_meals: set[int] = set()
    for j, s in enumerate(stats):
        col = alignment[:, j]
        whole_idx = [i for i in range(len(clusters)) if col[i] >= 0.5]
        whole_cluster = None
        if whole_idx:
            best = max(whole_idx, key=lambda i: (col[i], -i))
            whole_cluster = clusters[best]
            whole_meals |= s.support
        partial_cluster = None
        if s.support_count:
            hits = [i for i in range(len(clusters)) if overlaps[i, j] / s.support_count > 0.5]
            if hits:
                partial_cluster = clusters[hits[0]]
        rows.append(
            ObservationRediscovery(
                s.obs_id,
                s.support_count,
                whole_cluster is not None,
                whole_cluster,
                partial_cluster is not None,
                partial_cluster,
            )
        )
    return RediscoveryReport(
        clusters=tuple(clusters),
        cluster_sizes=tuple(sizes),
        obs_ids=tuple(s.obs_id for s in stats),
        alignment=alignment,
        any_observation=any_obs,
        observations=tuple(rows),
        whole_meal_frac=len(whole_meals) / len(dataset),
    )
