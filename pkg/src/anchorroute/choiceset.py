"""Per-OD route choice sets: observed routes plus loopless shortest-path
supplements, screened by length-weighted Jaccard similarity.

Observed candidates that overlap an existing member too strongly are
merged into the most similar member (the member absorbs the observation
count); synthesized candidates are simply discarded. The driven route is
exempt from screening, otherwise the observation could delete itself from
its own choice set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import shortestpaths
from .netgraph import EdgeId, NodeId, RoadNetwork


@dataclass(frozen=True)
class Route:
    """Connected edge sequence with derived totals."""

    edges: tuple[EdgeId, ...]
    origin: NodeId
    destination: NodeId
    length: float
    duration: float

    @classmethod
    def from_edges(cls, edges, net: RoadNetwork) -> "Route":
        edges = tuple(edges)
        if not edges:
            raise ValueError("route needs at least one edge")
        for a, b in zip(edges, edges[1:]):
            if net.edges[a].head != net.edges[b].tail:
                raise ValueError(f"route edges {a} -> {b} are not connected")
        return cls(
            edges=edges,
            origin=net.edges[edges[0]].tail,
            destination=net.edges[edges[-1]].head,
            length=sum(net.edges[e].length for e in edges),
            duration=sum(net.edge_duration(e) for e in edges),
        )

    def nodes(self, net: RoadNetwork) -> tuple[NodeId, ...]:
        out = [net.edges[self.edges[0]].tail]
        for e in self.edges:
            out.append(net.edges[e].head)
        return tuple(out)

    def is_simple(self, net: RoadNetwork) -> bool:
        nodes = self.nodes(net)
        return len(nodes) == len(set(nodes))


@dataclass
class ChoiceSet:
    od: tuple[NodeId, NodeId]
    routes: list[Route]
    chosen: int | None
    provenance: list[str] = field(default_factory=list)  # "observed" | "synthesized"
    multiplicity: list[int] = field(default_factory=list)
    depart: float | None = None
    occupied: bool | None = None

    def __post_init__(self):
        if self.chosen is not None and not (0 <= self.chosen < len(self.routes)):
            raise ValueError(f"chosen index {self.chosen} out of range")

    @property
    def size(self) -> int:
        return len(self.routes)


class UndersizedChoiceSetError(ValueError):
    """The similarity screen could not assemble a large-enough set; the
    partial set is attached for inspection."""

    def __init__(self, partial: ChoiceSet, min_size: int):
        super().__init__(
            f"only {partial.size} dissimilar routes found for OD {partial.od}, "
            f"need {min_size}"
        )
        self.partial = partial


def k_shortest(net: RoadNetwork, origin, destination, k, weight: str = "duration"):
    """The k cheapest loopless routes, non-decreasing in the chosen weight."""
    return list(iter_k_shortest(net, origin, destination, k, weight))


def iter_k_shortest(net: RoadNetwork, origin, destination, k, weight: str = "duration"):
    """Lazy variant of ``k_shortest``; stops early when the caller does."""
    adj = shortestpaths.adjacency(net, weight)
    heuristic = shortestpaths.euclidean_heuristic(net, destination, weight)
    count = 0
    for _cost, _nodes, edges in shortestpaths.yen_k_shortest(
        adj, origin, destination, k, heuristic
    ):
        yield Route.from_edges(edges, net)
        count += 1
        if count >= k:
            return


def weighted_jaccard(a: Route, b: Route, net: RoadNetwork) -> float:
    """Shared edge length over union edge length."""
    ea, eb = set(a.edges), set(b.edges)
    shared = sum(net.edges[e].length for e in ea & eb)
    union = sum(net.edges[e].length for e in ea | eb)
    return shared / union if union > 0.0 else 0.0


def build_choice_set(
    net: RoadNetwork,
    od: tuple[NodeId, NodeId],
    observed,
    min_size: int = 5,
    threshold: float = 0.4,
    k_cap: int = 50,
    weight: str = "duration",
    chosen: int | None = 0,
    depart: float | None = None,
    occupied: bool | None = None,
) -> ChoiceSet:
    """Assemble one OD's choice set.

    ``observed`` routes seed the set (the route at index ``chosen`` is the
    driven one and is added unconditionally; pass ``chosen=None`` when
    simulating, where the chosen route is assigned afterwards). Remaining
    observed routes merge into their most similar member when similarity
    reaches the threshold. Synthesized candidates are then drawn from the
    deviation search in cost order and kept only while dissimilar to every
    member, until the set reaches ``min_size`` or ``k_cap`` candidates are
    exhausted.
    """
    observed = list(observed)
    for r in observed:
        if (r.origin, r.destination) != tuple(od):
            raise ValueError(f"observed route OD ({r.origin}, {r.destination}) != {od}")
    members: list[Route] = []
    provenance: list[str] = []
    multiplicity: list[int] = []
    chosen_index: int | None = None

    def add(route, kind):
        members.append(route)
        provenance.append(kind)
        multiplicity.append(1)

    if chosen is not None:
        if not observed:
            raise ValueError("chosen index given but no observed routes")
        add(observed[chosen], "observed")
        chosen_index = 0
    for i, route in enumerate(observed):
        if chosen is not None and i == chosen:
            continue
        sims = [weighted_jaccard(route, m, net) for m in members]
        if sims and max(sims) >= threshold:
            multiplicity[sims.index(max(sims))] += 1
        else:
            add(route, "observed")

    if len(members) < min_size:
        try:
            for cand in iter_k_shortest(net, od[0], od[1], k_cap, weight):
                if all(weighted_jaccard(cand, m, net) < threshold for m in members):
                    add(cand, "synthesized")
                    if len(members) >= min_size:
                        break
        except ValueError:
            if not members:
                raise

    cs = ChoiceSet(
        od=tuple(od),
        routes=members,
        chosen=chosen_index,
        provenance=provenance,
        multiplicity=multiplicity,
        depart=depart,
        occupied=occupied,
    )
    if cs.size < min_size:
        raise UndersizedChoiceSetError(cs, min_size)
    return cs
