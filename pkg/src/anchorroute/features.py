"""Per-route feature vectors for the choice model.

Each route in a choice set gets: length (km), duration (min), an
intersection turn penalty, optionally the 13 dummy-coded environmental
factors aggregated along the route, the log path-size overlap correction,
and fractional anchor memberships. Cell-scale factors aggregate with
length weights from the hexagon split of the route; node-scale factors
average over traversed nodes. Units are chosen so coefficients land near
unit scale and are recorded in the dataset metadata.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .anchors import AnchorId, AnchorPartition
from .choiceset import ChoiceSet, Route
from .complexity import FACTOR_ORDER, FACTOR_SCALE, DummyTable
from .geometry import bearing
from .hexgrid import HexGrid, cells_along
from .netgraph import RoadNetwork

ROUTE_FEATURES = ("length_km", "duration_min", "intersection")

PENALTY_RIGHT = 1.0
PENALTY_STRAIGHT = 1.5
PENALTY_LEFT = 2.0


class ModelVariant(enum.IntEnum):
    """Controlled variants: environmental factors and anchor nests are
    switched on independently."""

    ROUTE_ONLY = 1
    ROUTE_ENV = 2
    ROUTE_ANCHORS = 3
    FULL = 4

    @property
    def with_env(self) -> bool:
        return self in (ModelVariant.ROUTE_ENV, ModelVariant.FULL)

    @property
    def with_anchors(self) -> bool:
        return self in (ModelVariant.ROUTE_ANCHORS, ModelVariant.FULL)


def feature_names(variant: ModelVariant) -> list[str]:
    names = list(ROUTE_FEATURES)
    if variant.with_env:
        names.extend(FACTOR_ORDER)
    return names


def turn_angle(in_bearing: float, out_bearing: float) -> float:
    """Signed bearing change in (-180, 180]; positive is a left turn."""
    delta = (out_bearing - in_bearing) % 360.0
    if delta > 180.0:
        delta -= 360.0
    return delta


def intersection_penalty(
    route: Route, net: RoadNetwork, straight_threshold: float = 30.0
) -> float:
    """Sum of turn penalties at the route's internal nodes.

    Within ``straight_threshold`` degrees of straight ahead scores 1.5,
    right turns 1, left turns (including reversals) 2.
    """
    total = 0.0
    for a, b in zip(route.edges, route.edges[1:]):
        ga = net.edge_geometry(a)
        gb = net.edge_geometry(b)
        delta = turn_angle(bearing(ga[-2], ga[-1]), bearing(gb[0], gb[1]))
        if abs(delta) <= straight_threshold:
            total += PENALTY_STRAIGHT
        elif delta < 0.0:
            total += PENALTY_RIGHT
        else:
            total += PENALTY_LEFT
    return total


def path_sizes(choice_set: ChoiceSet, net: RoadNetwork) -> list[float]:
    """Overlap correction per route: sum over the route's edges of the
    length share divided by the number of set routes using the edge."""
    counts: dict[int, int] = {}
    for r in choice_set.routes:
        for e in set(r.edges):
            counts[e] = counts.get(e, 0) + 1
    out = []
    for r in choice_set.routes:
        ps = sum(net.edges[e].length / r.length / counts[e] for e in set(r.edges))
        out.append(ps)
    return out


def path_size(index: int, choice_set: ChoiceSet, net: RoadNetwork) -> float:
    return path_sizes(choice_set, net)[index]


def aggregate_dummies(
    route: Route, dummies: DummyTable, grid: HexGrid, net: RoadNetwork
) -> np.ndarray:
    """The 13 factor dummies aggregated along a route, in canonical order.

    Cell-scale factors take the length-weighted mean over traversed cells,
    node-scale factors the plain mean over traversed nodes. Keys absent
    from the dummy table count as 0 (the global-mean imputation upstream
    makes absent dummies 0 by construction).
    """
    cell_weights = cells_along(route.edges, grid, net)
    total_w = sum(w for _c, w in cell_weights)
    nodes = route.nodes(net)
    out = np.empty(len(FACTOR_ORDER))
    for i, name in enumerate(FACTOR_ORDER):
        table = dummies.values_of(name)
        if FACTOR_SCALE[name] == "cell":
            out[i] = sum(w * table.get(c, 0) for c, w in cell_weights) / total_w
        else:
            out[i] = sum(table.get(n, 0) for n in nodes) / len(nodes)
    return out


def alpha_memberships(
    route: Route, partition: AnchorPartition, net: RoadNetwork
) -> dict[AnchorId, float]:
    """Fraction of route length assigned to each anchor; sums to 1."""
    lengths: dict[AnchorId, float] = {}
    for e in route.edges:
        try:
            anchor = partition.edge_to_anchor[e]
        except KeyError:
            raise ValueError(f"edge {e} has no anchor assignment") from None
        lengths[anchor] = lengths.get(anchor, 0.0) + net.edges[e].length
    return {a: v / route.length for a, v in sorted(lengths.items())}


@dataclass
class Observation:
    """One choice set's assembled features."""

    x: np.ndarray  # (n_routes, n_features)
    ln_ps: np.ndarray  # (n_routes,)
    alpha: list[dict[AnchorId, float]]
    chosen: int
    od: tuple[int, int]
    multiplicity: list[int]
    depart: float | None = None
    occupied: bool | None = None
    chosen_length: float | None = None

    @property
    def n_routes(self) -> int:
        return self.x.shape[0]


@dataclass
class Dataset:
    feature_names: list[str]
    observations: list[Observation]
    variant: ModelVariant
    units: dict = field(
        default_factory=lambda: {"length": "km", "duration": "min"}
    )

    @property
    def n_obs(self) -> int:
        return len(self.observations)

    def anchor_ids(self) -> list[AnchorId]:
        seen: set[AnchorId] = set()
        for obs in self.observations:
            for alpha in obs.alpha:
                seen.update(alpha)
        return sorted(seen)


UNIVERSAL_NEST: dict[AnchorId, float] = {0: 1.0}


def build_dataset(
    choice_sets,
    dummies: DummyTable | None,
    partition: AnchorPartition | None,
    grid: HexGrid | None,
    net: RoadNetwork,
    variant: ModelVariant,
) -> Dataset:
    """Assemble the estimation dataset for one model variant.

    Variants without environmental factors need no dummy table or grid;
    variants without anchors place every route in one universal nest.
    """
    variant = ModelVariant(variant)
    if variant.with_env and (dummies is None or grid is None):
        raise ValueError(f"variant {variant} needs dummy table and grid")
    if variant.with_anchors and partition is None:
        raise ValueError(f"variant {variant} needs an anchor partition")
    names = feature_names(variant)
    observations = []
    for cs in choice_sets:
        if cs.chosen is None:
            raise ValueError(f"choice set {cs.od} has no chosen route")
        ps = path_sizes(cs, net)
        rows = []
        alphas: list[dict[AnchorId, float]] = []
        for route in cs.routes:
            row = [
                route.length / 1000.0,
                route.duration / 60.0,
                intersection_penalty(route, net),
            ]
            if variant.with_env:
                row.extend(aggregate_dummies(route, dummies, grid, net))
            rows.append(row)
            if variant.with_anchors:
                alpha = alpha_memberships(route, partition, net)
                if not math.isclose(sum(alpha.values()), 1.0, abs_tol=1e-9):
                    raise ValueError(f"anchor fractions for OD {cs.od} do not sum to 1")
                alphas.append(alpha)
            else:
                alphas.append(dict(UNIVERSAL_NEST))
        x = np.asarray(rows, dtype=float)
        if x.shape[1] != len(names):
            raise ValueError(f"feature dimension {x.shape[1]} != {len(names)}")
        observations.append(
            Observation(
                x=x,
                ln_ps=np.log(ps),
                alpha=alphas,
                chosen=cs.chosen,
                od=cs.od,
                multiplicity=list(cs.multiplicity),
                depart=cs.depart,
                occupied=cs.occupied,
                chosen_length=cs.routes[cs.chosen].length,
            )
        )
    return Dataset(feature_names=names, observations=observations, variant=variant)
