"""Undirected simple graphs, degree utilities, and edge-list text I/O.

The edge-list interchange format is one header line ``<n> <m>`` followed by
``m`` lines ``<u> <v>`` with 0-indexed endpoints, no self-loops, and each
unordered pair listed once.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import EdgeListFormatError


class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``.

    Edges are kept as a sorted tuple of ``(u, v)`` pairs with ``u < v``;
    a CSR-style neighbor table is built up front because the sparse
    matrix-vector product is the hot path everywhere downstream.
    """

    __slots__ = ("n", "edges", "degrees", "_edge_set", "_indptr", "_indices")

    def __init__(self, n, edges):
        if n < 1:
            raise ValueError(f"node count must be positive, got {n}")
        seen = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop ({u},{u}) not allowed")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range for n={n}")
            seen.add((min(u, v), max(u, v)))
        self.n = int(n)
        self.edges = tuple(sorted(seen))
        self._edge_set = frozenset(self.edges)

        deg = np.zeros(n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        self.degrees = deg
        self.degrees.setflags(write=False)

        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        indices = np.empty(2 * len(self.edges), dtype=np.int64)
        cursor = indptr[:-1].copy()
        for u, v in self.edges:
            indices[cursor[u]] = v
            cursor[u] += 1
            indices[cursor[v]] = u
            cursor[v] += 1
        for i in range(n):
            indices[indptr[i]:indptr[i + 1]].sort()
        self._indptr = indptr
        self._indices = indices

    @property
    def m(self):
        return len(self.edges)

    def neighbors(self, i):
        """Sorted neighbor indices of node ``i`` (read-only view)."""
        return self._indices[self._indptr[i]:self._indptr[i + 1]]

    def has_edge(self, u, v):
        return (min(u, v), max(u, v)) in self._edge_set

    def neighbor_arrays(self):
        """CSR arrays ``(indptr, indices)`` for vectorized traversals."""
        return self._indptr, self._indices

    def adjacency_matrix(self):
        """Dense 0/1 adjacency matrix; intended for small instances."""
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))


def is_connected(g: Graph) -> bool:
    """True iff a traversal from node 0 reaches every node."""
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == g.n


def connected_components(g: Graph):
    """Component label per node, labels numbered from 0 in discovery order."""
    labels = np.full(g.n, -1, dtype=np.int64)
    current = 0
    for start in range(g.n):
        if labels[start] >= 0:
            continue
        labels[start] = current
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in g.neighbors(u):
                if labels[v] < 0:
                    labels[v] = current
                    queue.append(v)
        current += 1
    return labels


def relabel(g: Graph, perm) -> Graph:
    """Relabel nodes by the permutation ``perm`` (old index -> new index)."""
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(g.n)):
        raise ValueError("perm is not a permutation of 0..n-1")
    return Graph(g.n, [(int(perm[u]), int(perm[v])) for u, v in g.edges])


def edge_set_distance(a: Graph, b: Graph) -> int:
    """Hamming distance between edge sets (size of symmetric difference)."""
    return len(set(a.edges) ^ set(b.edges))


def erdos_gallai_graphical(degrees) -> bool:
    """Whether an integer sequence is realizable by a simple graph."""
    d = np.sort(np.asarray(degrees, dtype=np.int64))[::-1]
    n = len(d)
    if n == 0 or d.sum() % 2 != 0:
        return n == 0
    if d[0] >= n or d[-1] < 0:
        return False
    prefix = np.cumsum(d)
    for k in range(1, n + 1):
        rhs = k * (k - 1) + np.minimum(d[k:], k).sum()
        if prefix[k - 1] > rhs:
            return False
    return True


def load_edge_list(path) -> Graph:
    """Parse the edge-list text format; errors name the offending line."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise EdgeListFormatError(path, 1, "empty file")
    header = lines[0].split()
    if len(header) != 2:
        raise EdgeListFormatError(path, 1, f"header must be '<n> <m>', got {lines[0]!r}")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise EdgeListFormatError(path, 1, f"non-integer header {lines[0]!r}") from None
    if n < 1 or m < 0:
        raise EdgeListFormatError(path, 1, f"invalid sizes n={n} m={m}")

    edges = []
    seen = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListFormatError(path, line_no, f"expected '<u> <v>', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListFormatError(path, line_no, f"non-integer endpoint in {line!r}") from None
        if u == v:
            raise EdgeListFormatError(path, line_no, f"self-loop on node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise EdgeListFormatError(path, line_no, f"endpoint out of range in {line!r}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise EdgeListFormatError(path, line_no, f"duplicate edge {key}")
        seen.add(key)
        edges.append(key)
    if len(edges) != m:
        raise EdgeListFormatError(path, len(lines), f"header declares {m} edges, found {len(edges)}")
    return Graph(n, edges)


def save_edge_list(g: Graph, path) -> None:
    """Write the edge-list format; round-trips through load_edge_list."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")
