"""Independent brute-force references used by the tests."""

from itertools import combinations

import numpy as np


def naive_average_linkage(d):
    """Average linkage recomputing every cross-pair mean at every step.

    Returns [(left_leaves, right_leaves, height)] with left holding the
    smaller node id; node ids follow the n + step convention.
    """
    d = np.asarray(d, dtype=float)
    n = len(d)
    clusters = {i: [i] for i in range(n)}
    steps = []
    next_id = n
    while len(clusters) > 1:
        best = None
        for a, b in combinations(sorted(clusters), 2):
            total = d[np.ix_(clusters[a], clusters[b])].sum()
            dist = total / (len(clusters[a]) * len(clusters[b]))
            if best is None or dist < best[0]:
                best = (dist, a, b)
        dist, a, b = best
        steps.append((frozenset(clusters[a]), frozenset(clusters[b]), dist))
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        next_id += 1
    return steps


def pair_counting_ari(p, q):
    """ARI from the 2x2 table of element pairs (together/apart in each partition)."""
    p, q = list(p), list(q)
    a = b = c = d = 0
    for i, j in combinations(range(len(p)), 2):
        sp, sq = p[i] == p[j], q[i] == q[j]
        if sp and sq:
            a += 1
        elif sp:
            b += 1
        elif sq:
            c += 1
        else:
            d += 1
    denom = (a + b) * (b + d) + (a + c) * (c + d)
    if denom == 0:
        # every pair in the same cell: both partitions agree on every pair
        return 1.0 if b == c == 0 else 0.0
    return 2 * (a * d - b * c) / denom


def sums_of_squares(x, labels):
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    grand = x.mean(axis=0)
    total = sum(float(np.dot(r - grand, r - grand)) for r in x)
    within = 0.0
    between = 0.0
    for lab in sorted(set(labels.tolist())):
        block = x[labels == lab]
        c = block.mean(axis=0)
        within += sum(float(np.dot(r - c, r - c)) for r in block)
        between += len(block) * float(np.dot(c - grand, c - grand))
    return between, within, total


def interpolated_quantile(values, p):
    """Linear interpolation at 1-based rank h = (n - 1) p + 1."""
    xs = sorted(values)
    h = (len(xs) - 1) * p + 1
    lo = int(np.floor(h))
    if lo >= len(xs):
        return float(xs[-1])
    return xs[lo - 1] + (h - lo) * (xs[lo] - xs[lo - 1])


def gaussian_blobs(centers, n_per, sigma, seed):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    pts = [c + sigma * rng.standard_normal((n_per, centers.shape[1])) for c in centers]
    labels = np.repeat(np.arange(1, len(centers) + 1), n_per)
    return np.vstack(pts), labels
