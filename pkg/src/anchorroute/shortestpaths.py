"""Shortest-path machinery shared by the centrality metrics and the
choice-set generator: Dijkstra (optionally A*), Brandes betweenness
accumulation, and Yen's loopless deviation search.

All functions operate on an adjacency index built once per network and
weight; parallel edges are preserved throughout.
"""

from __future__ import annotations

import heapq
import itertools
import math

from .netgraph import EdgeId, NodeId, RoadNetwork

Adjacency = dict[NodeId, tuple[tuple[NodeId, float, EdgeId], ...]]


def adjacency(net: RoadNetwork, weight: str = "length") -> Adjacency:
    """Outbound adjacency ``node -> ((head, w, edge_id), ...)``."""
    if weight not in ("length", "duration"):
        raise ValueError(f"unknown weight {weight!r}")
    adj: dict[NodeId, list] = {n: [] for n in net.nodes}
    for eid in sorted(net.edges):
        e = net.edges[eid]
        w = e.length if weight == "length" else net.edge_duration(eid)
        adj[e.tail].append((e.head, w, eid))
    return {n: tuple(v) for n, v in adj.items()}


def single_source_distances(adj: Adjacency, source: NodeId) -> dict[NodeId, float]:
    """Dijkstra distances to every reachable node (source included, 0)."""
    dist = {source: 0.0}
    done = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w, _eid in adj[u]:
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def shortest_path(
    adj: Adjacency,
    source: NodeId,
    target: NodeId,
    banned_nodes=frozenset(),
    banned_edges=frozenset(),
    heuristic=None,
):
    """Cheapest source->target path avoiding banned nodes/edges.

    Returns ``(cost, node_tuple, edge_tuple)`` or None when unreachable.
    ``heuristic(node)`` must be an admissible lower bound on the remaining
    cost (A*); pass None for plain Dijkstra.
    """
    if source in banned_nodes or target in banned_nodes:
        return None
    h0 = heuristic(source) if heuristic else 0.0
    counter = itertools.count()
    heap = [(h0, next(counter), source, 0.0)]
    dist = {source: 0.0}
    prev: dict[NodeId, tuple[NodeId, EdgeId]] = {}
    done = set()
    while heap:
        _f, _c, u, d = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == target:
            nodes = [u]
            edges = []
            while nodes[-1] != source:
                pn, pe = prev[nodes[-1]]
                nodes.append(pn)
                edges.append(pe)
            return (d, tuple(reversed(nodes)), tuple(reversed(edges)))
        for v, w, eid in adj[u]:
            if v in banned_nodes or eid in banned_edges or v in done:
                continue
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = (u, eid)
                f = nd + (heuristic(v) if heuristic else 0.0)
                heapq.heappush(heap, (f, next(counter), v, nd))
    return None


def yen_k_shortest(
    adj: Adjacency,
    source: NodeId,
    target: NodeId,
    k: int,
    heuristic=None,
):
    """Yield up to k loopless paths in non-decreasing cost order.

    Deviation search over edge sequences, so parallel edges yield distinct
    paths. Ties are broken by edge-id sequence for determinism.
    """
    if source == target:
        raise ValueError("degenerate OD pair: origin equals destination")
    first = shortest_path(adj, source, target, heuristic=heuristic)
    if first is None:
        raise ValueError(f"destination {target} unreachable from {source}")
    found = [first]
    seen = {first[2]}
    yield first
    candidates: list[tuple[float, tuple, tuple]] = []
    prefix_weights: dict[tuple, float] = {}

    while len(found) < k:
        _cost, nodes, edges = found[-1]
        root_w = 0.0
        for i in range(len(nodes) - 1):
            spur = nodes[i]
            root_nodes = nodes[: i + 1]
            root_edges = edges[:i]
            banned_edges = set()
            for _fc, fn, fe in found:
                if fe[:i] == root_edges and len(fe) > i:
                    banned_edges.add(fe[i])
            banned_nodes = frozenset(root_nodes[:-1])
            spur_path = shortest_path(
                adj, spur, target, banned_nodes, frozenset(banned_edges), heuristic
            )
            if spur_path is not None:
                s_cost, s_nodes, s_edges = spur_path
                cand_edges = root_edges + s_edges
                if cand_edges not in seen:
                    seen.add(cand_edges)
                    cand_nodes = root_nodes[:-1] + s_nodes
                    heapq.heappush(
                        candidates, (root_w + s_cost, cand_edges, cand_nodes)
                    )
            if i < len(edges):
                root_w += _edge_weight(adj, nodes[i], edges[i])
        if not candidates:
            return
        cost, cand_edges, cand_nodes = heapq.heappop(candidates)
        found.append((cost, tuple(cand_nodes), cand_edges))
        yield found[-1]


def _edge_weight(adj: Adjacency, tail: NodeId, eid: EdgeId) -> float:
    for _v, w, e in adj[tail]:
        if e == eid:
            return w
    raise KeyError(f"edge {eid} not incident to node {tail}")


def betweenness(adj: Adjacency, nodes) -> dict[NodeId, float]:
    """Brandes accumulation over ordered pairs on the directed weighted graph.

    Each (j, k) pair contributes the fraction of j->k shortest paths that
    pass through the scored node; endpoints are excluded.
    """
    score = {n: 0.0 for n in nodes}
    for s in nodes:
        dist = {s: 0.0}
        sigma = {s: 1.0}
        preds: dict[NodeId, list[NodeId]] = {s: []}
        done = []
        settled = set()
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in settled:
                continue
            settled.add(u)
            done.append(u)
            d = dist[u]
            for v, w, _eid in adj[u]:
                nd = d + w
                if v not in dist or nd < dist[v]:
                    dist[v] = nd
                    sigma[v] = sigma[u]
                    preds[v] = [u]
                    heapq.heappush(heap, (nd, v))
                elif nd == dist[v] and v not in settled:
                    sigma[v] += sigma[u]
                    preds[v].append(u)
        delta = {u: 0.0 for u in done}
        for w_node in reversed(done):
            for v in preds[w_node]:
                delta[v] += sigma[v] / sigma[w_node] * (1.0 + delta[w_node])
            if w_node != s:
                score[w_node] += delta[w_node]
    return score


def euclidean_heuristic(net: RoadNetwork, target: NodeId, weight: str):
    """Admissible A* bound: straight-line distance, over max speed for
    duration-weighted searches."""
    tx, ty = net.nodes[target]
    if weight == "length":
        scale = 1.0
    else:
        vmax = max(e.speed for e in net.edges.values() if e.speed is not None)
        scale = 1.0 / vmax
    return lambda n: math.dist(net.nodes[n], (tx, ty)) * scale
