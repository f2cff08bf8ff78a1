"""Random-graph samplers for the simulated families.

Every sampler is a pure function of (parameters, seed). Samplers that can
produce isolated nodes redraw the offending node's edges once and fail
loudly if it is still isolated, because downstream trajectory construction
needs every degree to be positive.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import InfeasibleDegreesError, SamplingError
from .graphs import Graph, erdos_gallai_graphical


def _edges_from_upper(mask):
    iu, ju = np.nonzero(np.triu(mask, 1))
    return list(zip(iu.tolist(), ju.tolist()))


def _retry_isolated(prob_matrix, mask, rng, what):
    """Redraw the full row of each isolated node once; error if still isolated."""
    n = prob_matrix.shape[0]
    sym = mask | mask.T
    for i in range(n):
        if sym[i].any():
            continue
        draw = rng.random(n) < prob_matrix[i]
        draw[i] = False
        if not draw.any():
            raise SamplingError(f"{what}: node {i} isolated after one retry")
        for j in np.nonzero(draw)[0]:
            u, v = min(i, int(j)), max(i, int(j))
            mask[u, v] = True
        sym = mask | mask.T
    return mask


def sample_sbm(n, community_fractions, p, q, seed) -> Graph:
    """Stochastic blockmodel with contiguous index blocks.

    Block sizes are floor(fraction * n) with the rounding residue assigned
    to the last block. Pairs inside a block link with probability ``p``,
    across blocks with ``q``.
    """
    fractions = np.asarray(community_fractions, dtype=float)
    if np.any(fractions <= 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise ValueError("community fractions must be positive and sum to 1")
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    sizes = np.floor(fractions * n).astype(int)
    sizes[-1] += n - sizes.sum()
    if np.any(sizes < 1):
        raise ValueError(f"block sizes {sizes.tolist()} include an empty block")
    labels = np.repeat(np.arange(len(sizes)), sizes)

    rng = np.random.default_rng(seed)
    prob = np.where(labels[:, None] == labels[None, :], p, q)
    np.fill_diagonal(prob, 0.0)
    mask = np.triu(rng.random((n, n)) < prob, 1)
    mask = _retry_isolated(prob, mask, rng, "sample_sbm")
    return Graph(n, _edges_from_upper(mask))


def sample_watts_strogatz(n, ring_neighbors, rewire_prob, seed) -> Graph:
    """Ring lattice with ``ring_neighbors`` per node, clockwise edges rewired
    independently with ``rewire_prob`` to a uniform non-duplicate target."""
    if ring_neighbors % 2 != 0 or ring_neighbors >= n or ring_neighbors < 2:
        raise ValueError("ring_neighbors must be even and in [2, n)")
    if not 0 <= rewire_prob <= 1:
        raise ValueError("rewire_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)

    edge_set = set()
    for lap in range(1, ring_neighbors // 2 + 1):
        for i in range(n):
            j = (i + lap) % n
            edge_set.add((min(i, j), max(i, j)))

    degrees = {i: ring_neighbors for i in range(n)}
    for lap in range(1, ring_neighbors // 2 + 1):
        for i in range(n):
            j = (i + lap) % n
            key = (min(i, j), max(i, j))
            if key not in edge_set or rng.random() >= rewire_prob:
                continue
            if degrees[i] >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == i or (min(i, w), max(i, w)) in edge_set:
                w = int(rng.integers(n))
            edge_set.remove(key)
            degrees[j] -= 1
            edge_set.add((min(i, w), max(i, w)))
            degrees[w] += 1
    return Graph(n, sorted(edge_set))


def sample_barabasi_albert(n, edges_per_new_node, seed) -> Graph:
    """Preferential attachment grown from a seed clique.

    The seed is a clique on ``edges_per_new_node + 1`` nodes, which keeps
    every attachment target available and every degree positive.
    """
    m = int(edges_per_new_node)
    if m < 1 or m >= n:
        raise ValueError("edges_per_new_node must be in [1, n)")
    rng = np.random.default_rng(seed)
    m0 = m + 1
    edges = [(i, j) for i in range(m0) for j in range(i + 1, m0)]
    repeated = [i for i in range(m0) for _ in range(m0 - 1)]
    for node in range(m0, n):
        targets = set()
        while len(targets) < m:
            targets.add(repeated[int(rng.integers(len(repeated)))])
        for t in sorted(targets):
            edges.append((t, node))
            repeated.append(t)
        repeated.extend([node] * m)
    return Graph(n, edges)


def sample_chung_lu(target_degrees, seed) -> Graph:
    """Random graph whose expected degrees match ``target_degrees``.

    Pair (i, j) links with probability d_i d_j / sum(d), clipped to 1 with
    a warning when the sequence is too heavy for the model.
    """
    d = np.asarray(target_degrees, dtype=float)
    if np.any(d < 1):
        raise ValueError("target degrees must be >= 1")
    n = len(d)
    total = d.sum()
    prob = np.outer(d, d) / total
    if prob.max() > 1.0 + 1e-12:
        warnings.warn("chung-lu probabilities clipped to 1; expected degrees will sag")
        prob = np.minimum(prob, 1.0)
    np.fill_diagonal(prob, 0.0)
    rng = np.random.default_rng(seed)
    mask = np.triu(rng.random((n, n)) < prob, 1)
    mask = _retry_isolated(prob, mask, rng, "sample_chung_lu")
    return Graph(n, _edges_from_upper(mask))


def sample_with_degrees(degrees, seed, shuffle_rounds=10) -> Graph:
    """Uniform-ish simple graph with the exact degree sequence ``degrees``.

    Havel-Hakimi builds one realization, then seeded degree-preserving
    double-edge swaps randomize it.
    """
    d = np.asarray(degrees, dtype=np.int64)
    if not erdos_gallai_graphical(d):
        raise InfeasibleDegreesError(f"degree sequence {d.tolist()} is not graphical")
    n = len(d)
    remaining = [(int(d[i]), i) for i in range(n)]
    edge_set = set()
    while True:
        remaining.sort(reverse=True)
        top, u = remaining[0]
        if top == 0:
            break
        if top > len(remaining) - 1:
            raise InfeasibleDegreesError("havel-hakimi ran out of attachment targets")
        remaining[0] = (0, u)
        for k in range(1, top + 1):
            cnt, v = remaining[k]
            if cnt == 0:
                raise InfeasibleDegreesError("havel-hakimi hit an exhausted node")
            edge_set.add((min(u, v), max(u, v)))
            remaining[k] = (cnt - 1, v)

    rng = np.random.default_rng(seed)
    edges = sorted(edge_set)
    attempts = shuffle_rounds * max(len(edges), 1)
    for _ in range(attempts):
        if len(edges) < 2:
            break
        i1, i2 = rng.integers(len(edges)), rng.integers(len(edges))
        if i1 == i2:
            continue
        a, b = edges[i1]
        c, dd = edges[i2]
        if rng.random() < 0.5:
            c, dd = dd, c
        if len({a, b, c, dd}) < 4:
            continue
        e1 = (min(a, c), max(a, c))
        e2 = (min(b, dd), max(b, dd))
        if e1 in edge_set or e2 in edge_set:
            continue
        edge_set.remove(edges[i1])
        edge_set.remove(edges[i2])
        edge_set.add(e1)
        edge_set.add(e2)
        edges[i1] = e1
        edges[i2] = e2
    return Graph(n, sorted(edge_set))
