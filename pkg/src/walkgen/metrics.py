"""Graph statistics, 1-d Wasserstein distance, and cross-set relative error.

Each statistic maps a graph to a vector (per node, per random partition, or
per random node pair). Two graph sets are compared per statistic by the
ratio of mean pairwise Wasserstein distances, normalized so identical sets
score zero.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MetricUndefinedError
from .graphs import Graph, connected_components, is_connected, load_edge_list

METRICS = ("degree", "pagerank", "cut", "conductance", "modularity",
           "clustering", "orbit", "maxflow", "resistance")

N_PARTITIONS = 100
N_PAIRS = 100
PAGERANK_DAMPING = 0.85


@dataclass(frozen=True)
class StatisticVector:
    metric: str
    values: np.ndarray
    seed: int
    excluded: int = 0  # pairs dropped because no finite value exists


def _pagerank(g: Graph, tol=1e-10, max_iters=100_000):
    n = g.n
    deg = g.degrees.astype(float)
    p = np.full(n, 1.0 / n)
    indptr, indices = g.neighbor_arrays()
    dangling = deg == 0
    safe_deg = np.where(dangling, 1.0, deg)
    for _ in range(max_iters):
        share = p / safe_deg
        spread = np.add.reduceat(share[indices], indptr[:-1]) if g.m else np.zeros(n)
        spread[deg == 0] = 0.0
        loose = p[dangling].sum()
        nxt = (1.0 - PAGERANK_DAMPING) / n + PAGERANK_DAMPING * (spread + loose / n)
        if np.abs(nxt - p).sum() < tol:
            return nxt
        p = nxt
    return p


def _partitions(n, rng, count=N_PARTITIONS):
    return [rng.random(n) < 0.5 for _ in range(count)]


def _cut_value(g: Graph, side):
    return sum(1 for u, v in g.edges if side[u] != side[v])


def _conductance_partitions(g: Graph, rng, count=N_PARTITIONS, max_draws=100_000):
    """Partitions for conductance: degenerate zero-volume sides are
    resampled so the ratio stays finite."""
    deg = g.degrees
    out = []
    draws = 0
    while len(out) < count:
        side = rng.random(g.n) < 0.5
        draws += 1
        if draws > max_draws:
            raise MetricUndefinedError("could not draw non-degenerate partitions")
        vol_s = int(deg[side].sum())
        vol_c = int(deg[~side].sum())
        if vol_s == 0 or vol_c == 0:
            continue
        out.append((side, vol_s, vol_c))
    return out


def _modularity(g: Graph, side):
    m = g.m
    if m == 0:
        return 0.0
    deg = g.degrees
    inside_s = sum(1 for u, v in g.edges if side[u] and side[v])
    inside_c = sum(1 for u, v in g.edges if not side[u] and not side[v])
    vol_s = float(deg[side].sum())
    vol_c = float(deg[~side].sum())
    return (inside_s / m - (vol_s / (2.0 * m)) ** 2
            + inside_c / m - (vol_c / (2.0 * m)) ** 2)


def _clustering(g: Graph):
    out = np.zeros(g.n)
    neighbor_sets = [set(g.neighbors(i).tolist()) for i in range(g.n)]
    for i in range(g.n):
        d = g.degrees[i]
        if d < 2:
            continue
        nbrs = g.neighbors(i)
        links = 0
        for a_idx in range(len(nbrs)):
            sa = neighbor_sets[nbrs[a_idx]]
            for b_idx in range(a_idx + 1, len(nbrs)):
                if nbrs[b_idx] in sa:
                    links += 1
        out[i] = 2.0 * links / (d * (d - 1))
    return out


# Orbit numbering for connected graphlets on up to four nodes. Within each
# graphlet the induced degree identifies the orbit, so (size, edge count,
# induced degree) is enough to classify.
#   0: edge endpoint                8: 4-cycle
#   1: 2-path end   2: 2-path mid   9/10/11: tailed triangle, by degree 1/2/3
#   3: triangle                     12/13: diamond, by degree 2/3
#   4: 3-path end   5: 3-path mid   14: 4-clique
#   6: star leaf    7: star center

def orbit_counts(g: Graph):
    """Per-node orbit counts over connected induced subgraphs of size <= 4,
    as an (n, 15) integer matrix. Enumeration expands connected node sets
    so each induced subgraph is visited exactly once."""
    n = g.n
    counts = np.zeros((n, 15), dtype=np.int64)
    counts[:, 0] = g.degrees
    neighbor_sets = [set(g.neighbors(i).tolist()) for i in range(n)]

    def classify(nodes):
        k = len(nodes)
        inner = [sum(1 for other in nodes if other != v and other in neighbor_sets[v])
                 for v in nodes]
        e = sum(inner) // 2
        if k == 3:
            if e == 3:
                orb = {2: 3}
            else:  # e == 2
                orb = {1: 1, 2: 2}
        else:
            if e == 6:
                orb = {3: 14}
            elif e == 5:
                orb = {2: 12, 3: 13}
            elif e == 4:
                orb = {2: 8} if max(inner) == 2 else {1: 9, 2: 10, 3: 11}
            else:  # e == 3
                orb = {1: 4, 2: 5} if max(inner) == 2 else {1: 6, 3: 7}
        for v, dv in zip(nodes, inner):
            counts[v, orb[dv]] += 1

    def extend(sub, ext, root, size):
        while ext:
            w = ext.pop()
            new_sub = sub + (w,)
            if len(new_sub) == size:
                classify(new_sub)
                continue
            blocked = set(new_sub)
            for s in sub:
                blocked |= neighbor_sets[s]
            new_ext = set(ext)
            for u in neighbor_sets[w]:
                if u > root and u not in blocked:
                    new_ext.add(u)
            extend(new_sub, new_ext, root, size)

    for size in (3, 4):
        for v in range(n):
            ext = {u for u in neighbor_sets[v] if u > v}
            extend((v,), ext, v, size)
    return counts


def _bfs_augment(capacity, adjacency, s, t):
    n = len(adjacency)
    parent = np.full(n, -1, dtype=np.int64)
    parent[s] = s
    queue = deque([s])
    while queue:
        u = queue.popleft()
        if u == t:
            break
        for v in adjacency[u]:
            if parent[v] < 0 and capacity.get((u, v), 0) > 0:
                parent[v] = u
                queue.append(v)
    if parent[t] < 0:
        return 0
    v = t
    while v != s:
        u = int(parent[v])
        capacity[(u, v)] -= 1
        capacity[(v, u)] = capacity.get((v, u), 0) + 1
        v = u
    return 1


def max_flow(g: Graph, s, t):
    """Unit-capacity max flow via shortest augmenting paths; 0 across
    components."""
    if s == t:
        raise ValueError("source and sink must differ")
    capacity = {}
    adjacency = [set() for _ in range(g.n)]
    for u, v in g.edges:
        capacity[(u, v)] = 1
        capacity[(v, u)] = 1
        adjacency[u].add(v)
        adjacency[v].add(u)
    flow = 0
    while _bfs_augment(capacity, adjacency, s, t):
        flow += 1
    return flow


def _random_pairs(n, rng, count=N_PAIRS):
    pairs = []
    for _ in range(count):
        s = int(rng.integers(n))
        t = int(rng.integers(n - 1))
        if t >= s:
            t += 1
        pairs.append((s, t))
    return pairs


def effective_resistances(g: Graph, pairs):
    """Resistance per pair from the Laplacian pseudo-inverse; None marks
    pairs in different components."""
    lap = np.diag(g.degrees.astype(float)) - g.adjacency_matrix()
    pinv = np.linalg.pinv(lap)
    labels = connected_components(g)
    out = []
    for s, t in pairs:
        if labels[s] != labels[t]:
            out.append(None)
        else:
            out.append(float(pinv[s, s] - 2.0 * pinv[s, t] + pinv[t, t]))
    return out


def statistic(g: Graph, metric, seed=0) -> StatisticVector:
    """Compute one statistic vector; randomized metrics derive all their
    draws from ``seed`` so results are comparable across graphs."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; options: {METRICS}")
    rng = np.random.default_rng(seed)
    excluded = 0
    if metric == "degree":
        values = g.degrees.astype(float)
    elif metric == "pagerank":
        values = _pagerank(g)
    elif metric == "cut":
        values = np.array([float(_cut_value(g, side)) for side in _partitions(g.n, rng)])
    elif metric == "conductance":
        vals = []
        for side, vol_s, vol_c in _conductance_partitions(g, rng):
            vals.append(_cut_value(g, side) / min(vol_s, vol_c))
        values = np.array(vals)
    elif metric == "modularity":
        values = np.array([_modularity(g, side) for side in _partitions(g.n, rng)])
    elif metric == "clustering":
        values = _clustering(g)
    elif metric == "orbit":
        values = orbit_counts(g).astype(float).ravel()
    elif metric == "maxflow":
        values = np.array([float(max_flow(g, s, t)) for s, t in _random_pairs(g.n, rng)])
    else:  # resistance
        res = effective_resistances(g, _random_pairs(g.n, rng))
        finite = [r for r in res if r is not None]
        excluded = len(res) - len(finite)
        if not finite:
            raise MetricUndefinedError("all sampled pairs are disconnected; "
                                       "resistance vector is empty")
        values = np.array(finite)
    return StatisticVector(metric=metric, values=values, seed=seed, excluded=excluded)


def wasserstein1(x, y) -> float:
    """W1 distance between the empirical distributions of two vectors.

    Equal lengths reduce to the mean absolute difference of sorted entries;
    unequal lengths integrate the CDF gap over the merged value grid.
    """
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.size == 0 or y.size == 0:
        raise ValueError("wasserstein1 needs non-empty inputs")
    if x.size == y.size:
        return float(np.abs(x - y).mean())
    grid = np.concatenate([x, y])
    grid.sort()
    deltas = np.diff(grid)
    cdf_x = np.searchsorted(x, grid[:-1], side="right") / x.size
    cdf_y = np.searchsorted(y, grid[:-1], side="right") / y.size
    return float((np.abs(cdf_x - cdf_y) * deltas).sum())


def relative_error(gen_graphs, test_graphs, metric, seed=0) -> float:
    """Normalized cross-set statistic discrepancy.

    | mean-pairwise-distance(gen, test) / mean-pairwise-distance(test, test)
    scaled by |test|/|gen|, minus 1 |. Both sums run over all ordered pairs
    including equal indices. Zero iff the generated set matches the test
    set's pairwise geometry.
    """
    if not gen_graphs or not test_graphs:
        raise ValueError("both graph sets must be non-empty")
    if len(test_graphs) < 2:
        raise ValueError("need at least two test graphs for the normalizer")
    gen_stats = [statistic(g, metric, seed).values for g in gen_graphs]
    test_stats = [statistic(g, metric, seed).values for g in test_graphs]
    num = sum(wasserstein1(a, b) for a in gen_stats for b in test_stats)
    den = sum(wasserstein1(a, b) for a in test_stats for b in test_stats)
    if den == 0.0:
        raise MetricUndefinedError(
            f"test graphs are metrically identical under {metric!r}; error undefined")
    return float(abs(num / den * (len(test_stats) / len(gen_stats)) - 1.0))


@dataclass
class ErrorReport:
    errors: dict = field(default_factory=dict)          # metric -> relative error
    gen_count: int = 0
    test_count: int = 0
    gen_connected_fraction: float = 0.0
    test_connected_fraction: float = 0.0
    seed: int = 0
    excluded_pairs: dict = field(default_factory=dict)  # metric -> dropped pair count

    def to_json_dict(self):
        return {
            "metrics": dict(sorted(self.errors.items())),
            "gen": {"count": self.gen_count, "connected_fraction": self.gen_connected_fraction},
            "test": {"count": self.test_count, "connected_fraction": self.test_connected_fraction},
            "seed": self.seed,
            "excluded_pairs": dict(sorted(self.excluded_pairs.items())),
        }


def _load_dir(directory):
    paths = sorted(Path(directory).glob("*.txt")) or sorted(
        p for p in Path(directory).iterdir() if p.is_file() and p.suffix != ".json")
    return [load_edge_list(p) for p in paths]


def error_report(gen_dir, test_dir, metrics=METRICS, seed=0) -> ErrorReport:
    """Score a directory of generated edge lists against a test directory."""
    gen_graphs = _load_dir(gen_dir)
    test_graphs = _load_dir(test_dir)
    if not gen_graphs or not test_graphs:
        raise ValueError("both directories must contain edge-list files")
    report = ErrorReport(gen_count=len(gen_graphs), test_count=len(test_graphs), seed=seed)
    report.gen_connected_fraction = sum(is_connected(g) for g in gen_graphs) / len(gen_graphs)
    report.test_connected_fraction = sum(is_connected(g) for g in test_graphs) / len(test_graphs)
    for metric in metrics:
        report.errors[metric] = relative_error(gen_graphs, test_graphs, metric, seed)
        dropped = 0
        if metric == "resistance":
            for g in gen_graphs + test_graphs:
                dropped += statistic(g, metric, seed).excluded
        report.excluded_pairs[metric] = dropped
    return report


def write_report(report: ErrorReport, json_path, csv_path) -> None:
    with open(json_path, "w", encoding="ascii") as fh:
        json.dump(report.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(csv_path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "error"])
        for metric, err in sorted(report.errors.items()):
            writer.writerow([metric, repr(err)])
