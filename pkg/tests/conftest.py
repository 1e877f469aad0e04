import numpy as np
import pytest

from tgdiag.graphdata import EdgeStream


@pytest.fixture
def toy_stream() -> EdgeStream:
    """4 nodes, 4 timesteps, directed, with a repeated pair."""
    edges = [
        (0, 1, 1), (1, 2, 1),
        (0, 1, 2), (2, 3, 2),
        (0, 1, 3), (1, 0, 3),
        (2, 1, 4),
    ]
    return EdgeStream.from_edges(4, edges, "discrete")


def make_stream(node_count, edges, time_kind="discrete", **kw) -> EdgeStream:
    return EdgeStream.from_edges(node_count, edges, time_kind, **kw)


def rng_stream(seed, node_count=6, n_edges=30, t_max=8, time_kind="discrete"):
    """Random valid stream for property tests."""
    rng = np.random.default_rng(seed)
    edges = []
    for _ in range(n_edges):
        u = int(rng.integers(node_count))
        v = int(rng.integers(node_count - 1))
        v = v + (v >= u)
        edges.append((u, v, int(rng.integers(t_max) + 1)))
    return EdgeStream.from_edges(node_count, edges, time_kind)
