"""Independent reference implementations used as test oracles.

Everything here is deliberately written by a different method than the
package code it checks: exhaustive enumeration instead of Dijkstra or
deviation search, Floyd-Warshall instead of repeated single-source runs,
shapely instead of hand-rolled clipping, direct transcription of the
closed-form probabilities instead of the log-space kernels.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

INF = math.inf


def floyd_warshall(nodes, arcs):
    """All-pairs distances; arcs are (tail, head, weight) triples."""
    dist = {u: {v: (0.0 if u == v else INF) for v in nodes} for u in nodes}
    for t, h, w in arcs:
        if w < dist[t][h]:
            dist[t][h] = w
    for k in nodes:
        for i in nodes:
            dik = dist[i][k]
            if dik == INF:
                continue
            for j in nodes:
                alt = dik + dist[k][j]
                if alt < dist[i][j]:
                    dist[i][j] = alt
    return dist


def all_simple_node_paths(adj_nodes, source, target, limit=None):
    """Every simple node path source->target (DFS enumeration)."""
    paths = []
    stack = [(source, [source])]
    while stack:
        u, path = stack.pop()
        if u == target:
            paths.append(path)
            continue
        if limit is not None and len(path) > limit:
            continue
        for v in adj_nodes.get(u, ()):
            if v not in path:
                stack.append((v, path + [v]))
    return paths


def brute_betweenness(nodes, arcs):
    """Fractional shortest-path counts through each node, by enumerating
    every simple path for every ordered pair."""
    adj_nodes = {}
    weight = {}
    for t, h, w in arcs:
        adj_nodes.setdefault(t, set()).add(h)
        weight[(t, h)] = min(w, weight.get((t, h), INF))
    score = {n: 0.0 for n in nodes}
    for s in nodes:
        for t in nodes:
            if s == t:
                continue
            paths = all_simple_node_paths(adj_nodes, s, t)
            if not paths:
                continue
            costs = [sum(weight[(p[i], p[i + 1])] for i in range(len(p) - 1)) for p in paths]
            best = min(costs)
            shortest = [p for p, c in zip(paths, costs) if c == best]
            for p in shortest:
                for v in p[1:-1]:
                    score[v] += 1.0 / len(shortest)
    return score


def brute_k_shortest(net, source, target, k, weight="duration"):
    """All loopless routes by exhaustive enumeration, sorted by cost then
    edge ids; returns the first k as edge-id tuples."""
    out_edges = {}
    for eid, e in net.edges.items():
        out_edges.setdefault(e.tail, []).append(eid)
    results = []
    stack = [(source, (), frozenset([source]), 0.0)]
    while stack:
        u, edges, visited, cost = stack.pop()
        if u == target and edges:
            results.append((cost, edges))
            continue
        if u == target:
            continue
        for eid in out_edges.get(u, ()):
            h = net.edges[eid].head
            if h in visited:
                continue
            w = net.edges[eid].length if weight == "length" else net.edge_duration(eid)
            stack.append((h, edges + (eid,), visited | {h}, cost + w))
    results.sort(key=lambda t: (t[0], t[1]))
    return results[:k]


def direct_cnl_probs(v, alpha, mu):
    """Plain transcription of the closed-form choice probabilities."""
    w = [math.exp(x) for x in v]
    j_n = len(v)
    m_n = len(mu)
    s = [sum(alpha[j][m] * w[j] for j in range(j_n)) for m in range(m_n)]
    denom = sum(s[m] ** mu[m] for m in range(m_n) if s[m] > 0.0)
    p = [0.0] * j_n
    for m in range(m_n):
        if s[m] <= 0.0:
            continue
        p_m = s[m] ** mu[m] / denom
        for j in range(j_n):
            p[j] += p_m * (alpha[j][m] * w[j] / s[m])
    return p


def shapely_clipped_area(subject, clip):
    from shapely.geometry import Polygon

    inter = Polygon(subject).intersection(Polygon(clip))
    return inter.area


def nearest_center_cell(point, grid, search=3):
    """Hex assignment by brute-force nearest center over a neighborhood."""
    base = grid.cell_of(point)
    best, best_d = None, INF
    for dq in range(-search, search + 1):
        for dr in range(-search, search + 1):
            cell = (base[0] + dq, base[1] + dr)
            d = math.dist(point, grid.center(cell))
            if d < best_d:
                best, best_d = cell, d
    return best


def modularity_unweighted(adj_sets, membership):
    """Newman modularity of a partition of a simple undirected graph."""
    m2 = sum(len(nb) for nb in adj_sets.values())
    if m2 == 0:
        return 0.0
    comms = set(membership.values())
    q = 0.0
    for c in comms:
        inner = sum(
            1
            for u, nb in adj_sets.items()
            if membership[u] == c
            for v in nb
            if membership[v] == c
        )
        tot = sum(len(nb) for u, nb in adj_sets.items() if membership[u] == c)
        q += inner / m2 - (tot / m2) ** 2
    return q


def best_two_partition(adj_sets):
    """Exhaustive best-modularity split into at most two communities."""
    nodes = sorted(adj_sets)
    first = nodes[0]
    best_q, best_part = -INF, None
    for bits in itertools.product((0, 1), repeat=len(nodes) - 1):
        membership = {first: 0}
        membership.update({n: b for n, b in zip(nodes[1:], bits)})
        q = modularity_unweighted(adj_sets, membership)
        if q > best_q:
            best_q, best_part = q, membership
    return best_q, best_part


def random_dyadic_graph(rng, n_nodes, p=0.35, allow_parallel=False):
    """Random directed graph with dyadic-rational weights so path costs
    compare exactly in floating point; returns (nodes, arcs)."""
    nodes = list(range(n_nodes))
    arcs = []
    for u in nodes:
        for v in nodes:
            if u != v and rng.random() < p:
                w = rng.integers(4, 33) / 8.0
                arcs.append((u, v, float(w)))
    return nodes, arcs


def net_from_arcs(nodes, arcs, speed=1.0):
    """Package network from raw arcs; coordinates on a circle (geometry is
    irrelevant for the graph metrics under test)."""
    from anchorroute.netgraph import Edge, RoadNetwork

    coords = {
        n: (math.cos(2 * math.pi * i / max(len(nodes), 1)) * 1000.0,
            math.sin(2 * math.pi * i / max(len(nodes), 1)) * 1000.0)
        for i, n in enumerate(nodes)
    }
    edges = {
        i: Edge(t, h, w, speed if speed else None)
        for i, (t, h, w) in enumerate(arcs)
    }
    return RoadNetwork(coords, edges)
