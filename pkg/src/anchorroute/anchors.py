"""Anchor-region extraction by Louvain modularity maximization.

Anchors are spatially cohesive subnetworks used as nests in the route
choice model. Community detection runs on the undirected, unweighted
collapse of the road graph (parallel and antiparallel edges count once);
traffic weights are deliberately ignored, since anchors reflect network
structure, not flow. The implementation is deterministic for a given
seed: node visiting order comes from a seeded shuffle and local moves
break gain ties toward the smallest community id.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .netgraph import EdgeId, NodeId, RoadNetwork

AnchorId = int

_GAIN_EPS = 1e-12


@dataclass
class AnchorPartition:
    node_to_anchor: dict[NodeId, AnchorId]
    edge_to_anchor: dict[EdgeId, AnchorId] = field(default_factory=dict)
    modularity: float = 0.0
    modularity_history: tuple[float, ...] = ()

    @property
    def n_anchors(self) -> int:
        return len(set(self.node_to_anchor.values()))

    def members(self) -> dict[AnchorId, list[NodeId]]:
        out: dict[AnchorId, list[NodeId]] = {}
        for n in sorted(self.node_to_anchor):
            out.setdefault(self.node_to_anchor[n], []).append(n)
        return out


def collapse_undirected(net: RoadNetwork) -> dict[NodeId, set[NodeId]]:
    """Simple undirected adjacency; self-loops dropped."""
    adj: dict[NodeId, set] = {n: set() for n in net.nodes}
    for e in net.edges.values():
        if e.tail != e.head:
            adj[e.tail].add(e.head)
            adj[e.head].add(e.tail)
    return adj


def modularity_of(net: RoadNetwork, node_to_anchor, resolution: float = 1.0) -> float:
    """Newman modularity of a partition on the unweighted collapse."""
    adj = collapse_undirected(net)
    m2 = sum(len(nb) for nb in adj.values())
    if m2 == 0:
        return 0.0
    q = 0.0
    tot: dict[AnchorId, float] = {}
    inner: dict[AnchorId, float] = {}
    for u, nb in adj.items():
        cu = node_to_anchor[u]
        tot[cu] = tot.get(cu, 0.0) + len(nb)
        inner[cu] = inner.get(cu, 0.0) + sum(1 for v in nb if node_to_anchor[v] == cu)
    for c in tot:
        q += inner.get(c, 0.0) / m2 - resolution * (tot[c] / m2) ** 2
    return q


def _one_level(adj, loops, degrees, m2, resolution, order):
    """Local-move phase; returns (community map, whether anything moved)."""
    comm = {n: n for n in adj}
    tot = {n: degrees[n] for n in adj}
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            ci = comm[i]
            links = {}
            for j, w in adj[i].items():
                links[comm[j]] = links.get(comm[j], 0.0) + w
            tot[ci] -= degrees[i]
            stay = links.get(ci, 0.0) - resolution * degrees[i] * tot[ci] / m2
            # sorted iteration + strict improvement keeps the smallest
            # community id among gain ties
            best_c, best_score = None, -float("inf")
            for c in sorted(links):
                if c == ci:
                    continue
                score = links[c] - resolution * degrees[i] * tot[c] / m2
                if score > best_score + _GAIN_EPS:
                    best_c, best_score = c, score
            if best_c is not None and best_score > stay + _GAIN_EPS:
                comm[i] = best_c
                tot[best_c] += degrees[i]
                improved = True
                moved_any = True
            else:
                comm[i] = ci
                tot[ci] += degrees[i]
    return comm, moved_any


def _aggregate(adj, loops, comm):
    new_adj: dict[int, dict[int, float]] = {}
    new_loops: dict[int, float] = {}
    for c in set(comm.values()):
        new_adj[c] = {}
        new_loops[c] = 0.0
    for u, nb in adj.items():
        cu = comm[u]
        for v, w in nb.items():
            if u < v:
                cv = comm[v]
                if cu == cv:
                    new_loops[cu] += w
                else:
                    new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
                    new_adj[cv][cu] = new_adj[cv].get(cu, 0.0) + w
    for u, w in loops.items():
        new_loops[comm[u]] += w
    return new_adj, new_loops


def _level_modularity(adj, loops, degrees, m2, comm, resolution):
    tot: dict[int, float] = {}
    inner: dict[int, float] = {}
    for u in adj:
        cu = comm[u]
        tot[cu] = tot.get(cu, 0.0) + degrees[u]
        inner[cu] = inner.get(cu, 0.0) + 2.0 * loops.get(u, 0.0)
        for v, w in adj[u].items():
            if comm[v] == cu:
                inner[cu] += w
    return sum(inner[c] / m2 - resolution * (tot[c] / m2) ** 2 for c in tot)


def louvain(net: RoadNetwork, resolution: float = 1.0, seed: int = 0) -> AnchorPartition:
    """Detect anchor regions; deterministic for a given seed.

    Returns a partition over nodes with modularity and its per-outer-
    iteration history (non-decreasing). Edge assignment is left to
    ``assign_edges``.
    """
    if not net.nodes:
        raise ValueError("empty network")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    simple = collapse_undirected(net)
    adj = {u: {v: 1.0 for v in nb} for u, nb in simple.items()}
    loops: dict[int, float] = {}
    membership = {n: n for n in net.nodes}
    rng = random.Random(seed)
    history = []

    m2 = sum(sum(nb.values()) for nb in adj.values())
    if m2 == 0.0:
        part = _finalize(net, membership, history=(0.0,))
        return part

    while True:
        degrees = {u: sum(adj[u].values()) + 2.0 * loops.get(u, 0.0) for u in adj}
        order = sorted(adj)
        rng.shuffle(order)
        comm, moved = _one_level(adj, loops, degrees, m2, resolution, order)
        history.append(_level_modularity(adj, loops, degrees, m2, comm, resolution))
        membership = {n: comm[membership[n]] for n in membership}
        if not moved:
            break
        adj, loops = _aggregate(adj, loops, comm)

    return _finalize(net, membership, tuple(history))


def _finalize(net, membership, history) -> AnchorPartition:
    # canonical anchor ids: consecutive, ordered by smallest member node
    first_member: dict[int, NodeId] = {}
    for n in sorted(membership):
        c = membership[n]
        first_member.setdefault(c, n)
    relabel = {
        c: i for i, c in enumerate(sorted(first_member, key=lambda c: first_member[c]))
    }
    node_to_anchor = {n: relabel[membership[n]] for n in membership}
    part = AnchorPartition(
        node_to_anchor=node_to_anchor,
        modularity=history[-1] if history else 0.0,
        modularity_history=tuple(history),
    )
    return assign_edges(part, net)


def assign_edges(partition: AnchorPartition, net: RoadNetwork) -> AnchorPartition:
    """Total edge assignment: intra-anchor edges go to the common anchor,
    anchor-spanning edges to their tail node's anchor."""
    # both rules collapse to the tail's anchor: for intra-anchor edges the
    # tail and head anchors coincide
    mapping = {eid: partition.node_to_anchor[e.tail] for eid, e in net.edges.items()}
    partition.edge_to_anchor = mapping
    return partition


def cohesion_report(partition: AnchorPartition, net: RoadNetwork) -> dict:
    """Per-anchor connectivity diagnostics; split anchors are flagged."""
    adj = collapse_undirected(net)
    report = {}
    violations = []
    for anchor, members in partition.members().items():
        member_set = set(members)
        seen = {members[0]}
        stack = [members[0]]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v in member_set and v not in seen:
                    seen.add(v)
                    stack.append(v)
        connected = len(seen) == len(member_set)
        report[anchor] = {"nodes": len(members), "connected": connected}
        if not connected:
            violations.append(anchor)
    return {
        "anchors": report,
        "n_anchors": partition.n_anchors,
        "modularity": partition.modularity,
        "violations": violations,
    }
