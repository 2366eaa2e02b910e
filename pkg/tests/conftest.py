import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anchorroute.netgraph import Edge, RoadNetwork


@pytest.fixture
def path_net():
    """Bidirectional path A(0)-B(1)-C(2), unit lengths."""
    nodes = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (2.0, 0.0)}
    edges = {
        0: Edge(0, 1, 1.0, 1.0),
        1: Edge(1, 0, 1.0, 1.0),
        2: Edge(1, 2, 1.0, 1.0),
        3: Edge(2, 1, 1.0, 1.0),
    }
    return RoadNetwork(nodes, edges)


@pytest.fixture
def directed_path_net():
    """One-way path A(0) -> B(1) -> C(2), unit lengths."""
    nodes = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (2.0, 0.0)}
    edges = {0: Edge(0, 1, 1.0, 1.0), 1: Edge(1, 2, 1.0, 1.0)}
    return RoadNetwork(nodes, edges)


def make_clique_net(cliques, bridges, spacing=10.0):
    """Disjoint bidirectional cliques joined by bridge node pairs."""
    nodes = {}
    edges = {}
    eid = 0
    nid = 0
    groups = []
    for ci, size in enumerate(cliques):
        group = []
        for k in range(size):
            nodes[nid] = (ci * spacing + (k % 3) * 1.0, (k // 3) * 1.0)
            group.append(nid)
            nid += 1
        groups.append(group)
        for a in group:
            for b in group:
                if a < b:
                    edges[eid] = Edge(a, b, 1.0, 1.0)
                    eid += 1
                    edges[eid] = Edge(b, a, 1.0, 1.0)
                    eid += 1
    for a, b in bridges:
        edges[eid] = Edge(a, b, 1.0, 1.0)
        eid += 1
        edges[eid] = Edge(b, a, 1.0, 1.0)
        eid += 1
    return RoadNetwork(nodes, edges), groups
