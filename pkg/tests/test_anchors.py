import numpy as np
import pytest

from anchorroute.anchors import (
    assign_edges,
    cohesion_report,
    collapse_undirected,
    louvain,
    modularity_of,
)
from anchorroute.netgraph import Edge, RoadNetwork

from conftest import make_clique_net
from reference import best_two_partition, modularity_unweighted, net_from_arcs


class TestLouvain:
    def test_two_cliques_split(self):
        net, groups = make_clique_net([5, 5], bridges=[(0, 5)])
        part = louvain(net, seed=0)
        assert part.n_anchors == 2
        anchors = [set(m) for m in part.members().values()]
        assert set(groups[0]) in anchors
        assert set(groups[1]) in anchors
        # exhaustive check: that split is the best 2-partition
        adj = collapse_undirected(net)
        best_q, best_part = best_two_partition(adj)
        split = {n: (0 if n in groups[0] else 1) for n in adj}
        assert modularity_unweighted(adj, split) == pytest.approx(best_q)
        assert part.modularity == pytest.approx(best_q, rel=1e-12)

    def test_single_edge_modularity_zero(self):
        net = RoadNetwork(
            {0: (0.0, 0.0), 1: (1.0, 0.0)},
            {0: Edge(0, 1, 1.0), 1: Edge(1, 0, 1.0)},
        )
        all_in_one = {0: 0, 1: 0}
        assert modularity_of(net, all_in_one) == 0.0

    def test_ring_of_four_cliques(self):
        bridges = [(0, 5), (5 + 4, 10), (10 + 4, 15), (15 + 4, 0)]
        net, groups = make_clique_net([5, 5, 5, 5], bridges=bridges)
        part = louvain(net, seed=3)
        assert part.n_anchors == 4
        anchors = [set(m) for m in part.members().values()]
        for g in groups:
            assert set(g) in anchors

    def test_determinism_same_seed(self):
        net, _ = make_clique_net([4, 4, 4], bridges=[(0, 4), (4, 8)])
        a = louvain(net, seed=42)
        b = louvain(net, seed=42)
        assert a.node_to_anchor == b.node_to_anchor
        assert a.edge_to_anchor == b.edge_to_anchor
        assert a.modularity == b.modularity
        assert a.modularity_history == b.modularity_history

    def test_modularity_reported_matches_partition(self):
        rng = np.random.default_rng(0)
        for trial in range(30):
            n = int(rng.integers(4, 16))
            arcs = []
            for u in range(n):
                for v in range(u + 1, n):
                    if rng.random() < 0.3:
                        arcs.append((u, v, 1.0))
                        arcs.append((v, u, 1.0))
            if not arcs:
                continue
            net = net_from_arcs(list(range(n)), arcs)
            part = louvain(net, seed=trial)
            adj = collapse_undirected(net)
            assert part.modularity == pytest.approx(
                modularity_unweighted(adj, part.node_to_anchor), rel=1e-12
            )
            assert -0.5 <= part.modularity <= 1.0

    def test_history_non_decreasing(self):
        rng = np.random.default_rng(9)
        for trial in range(40):
            n = int(rng.integers(5, 20))
            arcs = []
            for u in range(n):
                for v in range(u + 1, n):
                    if rng.random() < rng.uniform(0.1, 0.5):
                        arcs.append((u, v, 1.0))
                        arcs.append((v, u, 1.0))
            if not arcs:
                continue
            net = net_from_arcs(list(range(n)), arcs)
            part = louvain(net, seed=trial)
            hist = part.modularity_history
            assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))

    def test_resolution_changes_granularity(self):
        net, _ = make_clique_net([4, 4, 4, 4], bridges=[(0, 4), (4, 8), (8, 12), (12, 0)])
        coarse = louvain(net, resolution=0.1, seed=0)
        fine = louvain(net, resolution=4.0, seed=0)
        assert coarse.n_anchors <= fine.n_anchors

    def test_empty_network_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            louvain(RoadNetwork({}, {}))


class TestEdgeAssignment:
    def test_intra_and_boundary_edges(self):
        net, groups = make_clique_net([5, 5], bridges=[(0, 5)])
        part = louvain(net, seed=0)
        intra = next(
            eid
            for eid, e in net.edges.items()
            if e.tail in groups[0] and e.head in groups[0]
        )
        assert part.edge_to_anchor[intra] == part.node_to_anchor[groups[0][0]]
        bridge = next(
            eid for eid, e in net.edges.items() if e.tail == 0 and e.head == 5
        )
        assert part.edge_to_anchor[bridge] == part.node_to_anchor[0]
        reverse = next(
            eid for eid, e in net.edges.items() if e.tail == 5 and e.head == 0
        )
        assert part.edge_to_anchor[reverse] == part.node_to_anchor[5]

    def test_total_assignment_conserves_length(self):
        net, _ = make_clique_net([5, 6, 4], bridges=[(0, 5), (5, 11)])
        part = louvain(net, seed=1)
        assert set(part.edge_to_anchor) == set(net.edges)
        per_anchor = {}
        for eid, anchor in part.edge_to_anchor.items():
            per_anchor[anchor] = per_anchor.get(anchor, 0.0) + net.edges[eid].length
        assert sum(per_anchor.values()) == pytest.approx(net.total_length())


class TestCohesion:
    def test_clique_anchor_cohesive(self):
        net, _ = make_clique_net([5, 5], bridges=[(0, 5)])
        part = louvain(net, seed=0)
        report = cohesion_report(part, net)
        assert report["violations"] == []
        assert all(v["connected"] for v in report["anchors"].values())
        assert report["n_anchors"] == 2

    def test_split_anchor_flagged(self):
        # force one anchor out of two disconnected cliques
        net, groups = make_clique_net([4, 4], bridges=[])
        from anchorroute.anchors import AnchorPartition

        part = AnchorPartition(node_to_anchor={n: 0 for n in net.nodes})
        part = assign_edges(part, net)
        report = cohesion_report(part, net)
        assert report["violations"] == [0]
