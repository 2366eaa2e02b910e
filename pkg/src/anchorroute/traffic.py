"""Per-edge travel speed estimation from trajectory speed samples.

An edge's speed is the arithmetic mean of all sample speeds observed on it,
pooled across trips; dividing distance by timestamps is deliberately
avoided because single-sample edges make the quotient unreliable. Edges
without samples inherit the mean of adjacent known edges, propagated in
synchronous rounds. Zero-speed samples are retained: stopped traffic is
signal.
"""

from __future__ import annotations

import math
import statistics

from .netgraph import EdgeId, RoadNetwork, Trip


class NoSpeedDataError(ValueError):
    """No speed information exists anywhere, so no fallback mean is defined."""


def estimate_speeds(net: RoadNetwork, trips) -> dict[EdgeId, float]:
    """Pooled mean of all sample speeds per edge, across all trips."""
    total: dict[EdgeId, float] = {}
    count: dict[EdgeId, int] = {}
    for trip in trips:
        for eid, speed in trip.speed_samples:
            if eid not in net.edges:
                raise ValueError(f"speed sample references unknown edge {eid}")
            if not (speed >= 0.0 and math.isfinite(speed)):
                raise ValueError(f"negative or non-finite speed sample {speed} on edge {eid}")
            total[eid] = total.get(eid, 0.0) + speed
            count[eid] = count.get(eid, 0) + 1
    return {eid: total[eid] / count[eid] for eid in total}


def edge_adjacency(net: RoadNetwork) -> dict[EdgeId, tuple[EdgeId, ...]]:
    """Edges are adjacent when they share a node, in either direction."""
    by_node: dict[int, list[EdgeId]] = {n: [] for n in net.nodes}
    for eid in sorted(net.edges):
        e = net.edges[eid]
        by_node[e.tail].append(eid)
        if e.head != e.tail:
            by_node[e.head].append(eid)
    adj: dict[EdgeId, set] = {eid: set() for eid in net.edges}
    for incident in by_node.values():
        for eid in incident:
            adj[eid].update(incident)
    return {eid: tuple(sorted(adj[eid] - {eid})) for eid in net.edges}


def fill_missing_speeds(net: RoadNetwork, partial: dict[EdgeId, float]) -> dict[EdgeId, float]:
    """Extend a partial speed map to every edge.

    Unknown edges take the mean of adjacent known edges; rounds are
    synchronous (each round reads only the previous round's state), so the
    result does not depend on iteration order. Edge-connectivity components
    containing no known edge receive the global mean of the input map.
    """
    for eid, speed in partial.items():
        if eid not in net.edges:
            raise ValueError(f"speed for unknown edge {eid}")
        if not (speed > 0.0 and math.isfinite(speed)):
            raise ValueError(f"invalid speed {speed} for edge {eid}")
    if not partial and net.edges:
        raise NoSpeedDataError(
            "no edge has an estimated speed; global fallback mean is undefined"
        )
    adj = edge_adjacency(net)
    speeds = dict(partial)
    while len(speeds) < len(net.edges):
        frontier = {}
        for eid in net.edges:
            if eid in speeds:
                continue
            known = [speeds[nb] for nb in adj[eid] if nb in speeds]
            if known:
                frontier[eid] = statistics.fmean(known)
        if not frontier:
            # remaining edges live in components with no sampled edge
            global_mean = statistics.fmean(partial.values())
            for eid in net.edges:
                if eid not in speeds:
                    speeds[eid] = global_mean
            break
        speeds.update(frontier)
    return speeds


def apply_speeds(net: RoadNetwork, trips) -> RoadNetwork:
    """Estimate, fill, and attach speeds; durations are recomputed."""
    return net.with_speeds(fill_missing_speeds(net, estimate_speeds(net, trips)))
