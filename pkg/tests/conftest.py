import numpy as np
import pytest

from walkgen.graphs import Graph, is_connected


def random_connected_graph(n, p, seed):
    """Erdos-Renyi conditioned on connectivity (reseeds until connected)."""
    attempt = 0
    while True:
        rng = np.random.default_rng(seed + 7919 * attempt)
        mask = np.triu(rng.random((n, n)) < p, 1)
        iu, ju = np.nonzero(mask)
        g = Graph(n, list(zip(iu.tolist(), ju.tolist())))
        if g.m >= 1 and g.degrees.min() >= 1 and is_connected(g):
            return g
        attempt += 1


@pytest.fixture
def path3():
    return Graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def triangle():
    return Graph(3, [(0, 1), (1, 2), (0, 2)])
