"""Built-environment complexity factors at node and hexagon scale.

Thirteen factors describe how structurally and visually complex the
environment along a road is: five node-scale network metrics
(eccentricity, degree, closeness, betweenness, sky view) and eight
cell-scale layout metrics (average road length, circuity, connectivity,
POI diversity as Simpson and Shannon indices, building density, floor
area ratio, compactness). Factors are dummy-coded against their global
mean before entering route utilities; cells without data stay absent
here and are imputed by consumers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import shortestpaths
from .geometry import clipped_area, polygon_area
from .hexgrid import CellId, HexGrid, point_along
from .netgraph import Building, NodeId, Poi, RoadNetwork

NODE_FACTORS = ("eccentricity", "degree", "closeness", "betweenness", "sky_view")
CELL_FACTORS = (
    "avg_road_length",
    "circuity",
    "connectivity",
    "simpson",
    "shannon",
    "building_density",
    "floor_area_ratio",
    "compactness",
)

# canonical ordering of the 13 factors in feature vectors
FACTOR_ORDER = (
    "eccentricity",
    "avg_road_length",
    "circuity",
    "degree",
    "closeness",
    "betweenness",
    "connectivity",
    "simpson",
    "shannon",
    "building_density",
    "floor_area_ratio",
    "compactness",
    "sky_view",
)

FACTOR_SCALE = {name: ("node" if name in NODE_FACTORS else "cell") for name in FACTOR_ORDER}


@dataclass
class SkyViewParams:
    """Sky-view discretization; recorded in run metadata."""

    n_sectors: int = 16
    radius: float = 100.0
    floor_height: float = 3.0


@dataclass
class FactorTable:
    node_factors: dict[str, dict[NodeId, float]] = field(default_factory=dict)
    cell_factors: dict[str, dict[CellId, float]] = field(default_factory=dict)

    def values_of(self, name: str) -> dict:
        if name in NODE_FACTORS:
            return self.node_factors[name]
        return self.cell_factors[name]

    def mean_of(self, name: str) -> float:
        vals = self.values_of(name)
        if not vals:
            return 0.0
        return sum(vals.values()) / len(vals)


@dataclass
class DummyTable:
    """Mean-threshold coding: 1 where the raw value strictly exceeds the
    factor's global mean over populated keys, 0 otherwise."""

    node_factors: dict[str, dict[NodeId, int]] = field(default_factory=dict)
    cell_factors: dict[str, dict[CellId, int]] = field(default_factory=dict)

    def values_of(self, name: str) -> dict:
        if name in NODE_FACTORS:
            return self.node_factors[name]
        return self.cell_factors[name]


# --- node-scale network metrics --------------------------------------------

def eccentricity(net: RoadNetwork) -> dict[NodeId, float]:
    """Max length-weighted shortest distance to any reachable node."""
    if not net.nodes:
        raise ValueError("empty network")
    adj = shortestpaths.adjacency(net, "length")
    out = {}
    for n in net.nodes:
        dist = shortestpaths.single_source_distances(adj, n)
        out[n] = max((d for m, d in dist.items() if m != n), default=0.0)
    return out


def degree_centrality(net: RoadNetwork) -> dict[NodeId, float]:
    """Distinct-neighbor degree over n-1, on the undirected collapse."""
    n = len(net.nodes)
    neighbors: dict[NodeId, set] = {v: set() for v in net.nodes}
    for e in net.edges.values():
        if e.tail != e.head:
            neighbors[e.tail].add(e.head)
            neighbors[e.head].add(e.tail)
    if n <= 1:
        return {v: 0.0 for v in net.nodes}
    return {v: len(neighbors[v]) / (n - 1) for v in net.nodes}


def closeness(net: RoadNetwork) -> dict[NodeId, float]:
    """(g-1) / sum of outbound distances over the g-node reachable set."""
    adj = shortestpaths.adjacency(net, "length")
    out = {}
    for n in net.nodes:
        dist = shortestpaths.single_source_distances(adj, n)
        g = len(dist)
        total = sum(dist.values())
        out[n] = (g - 1) / total if total > 0.0 else 0.0
    return out


def betweenness(net: RoadNetwork) -> dict[NodeId, float]:
    """Directed, length-weighted Brandes betweenness (fractional ties)."""
    adj = shortestpaths.adjacency(net, "length")
    return shortestpaths.betweenness(adj, sorted(net.nodes))


def sky_view_factor(
    net: RoadNetwork, buildings, params: SkyViewParams | None = None
) -> dict[NodeId, float]:
    """1 - mean(sin^2 of the max elevation angle) over azimuth sectors.

    A building is located by its footprint centroid; its elevation angle
    from a node is atan(height / distance). A centroid coinciding with the
    node counts as overhead (90 degrees) in every sector.
    """
    p = params or SkyViewParams()
    sector_width = 2.0 * math.pi / p.n_sectors
    heights = []
    for b in buildings:
        h = b.height if b.height is not None else b.floors * p.floor_height
        heights.append((b.centroid, h))
    out = {}
    for nid, (nx, ny) in net.nodes.items():
        beta = [0.0] * p.n_sectors
        for (cx, cy), h in heights:
            d = math.hypot(cx - nx, cy - ny)
            if d > p.radius:
                continue
            if d == 0.0:
                for s in range(p.n_sectors):
                    beta[s] = math.pi / 2.0
                continue
            az = math.atan2(cy - ny, cx - nx) % (2.0 * math.pi)
            sector = min(int(az / sector_width), p.n_sectors - 1)
            beta[sector] = max(beta[sector], math.atan2(h, d))
        out[nid] = 1.0 - sum(math.sin(b) ** 2 for b in beta) / p.n_sectors
    return out


# --- cell-scale metrics -----------------------------------------------------

def _edge_cell(net: RoadNetwork, grid: HexGrid, eid) -> CellId:
    """Cell of the edge's geometric midpoint (half the arc length)."""
    return grid.cell_of(point_along(net.edge_geometry(eid), 0.5))


def avg_road_length(net: RoadNetwork, grid: HexGrid) -> dict[CellId, float]:
    total: dict[CellId, float] = {}
    count: dict[CellId, int] = {}
    for eid in sorted(net.edges):
        cell = _edge_cell(net, grid, eid)
        total[cell] = total.get(cell, 0.0) + net.edges[eid].length
        count[cell] = count.get(cell, 0) + 1
    return {c: total[c] / count[c] for c in total}


def circuity(net: RoadNetwork, grid: HexGrid) -> dict[CellId, float]:
    """Sum of real lengths over sum of endpoint chords per cell; loop edges
    (zero chord) are excluded from both sums."""
    real: dict[CellId, float] = {}
    chord: dict[CellId, float] = {}
    for eid in sorted(net.edges):
        e = net.edges[eid]
        straight = math.dist(net.nodes[e.tail], net.nodes[e.head])
        if straight == 0.0:
            continue
        cell = _edge_cell(net, grid, eid)
        real[cell] = real.get(cell, 0.0) + e.length
        chord[cell] = chord.get(cell, 0.0) + straight
    return {c: real[c] / chord[c] for c in real if chord[c] > 0.0}


def connectivity(net: RoadNetwork, grid: HexGrid) -> dict[CellId, float]:
    """Edges (midpoint rule) per node located in the cell; cells with no
    node are undefined and absent."""
    edges: dict[CellId, int] = {}
    nodes: dict[CellId, int] = {}
    for eid in sorted(net.edges):
        cell = _edge_cell(net, grid, eid)
        edges[cell] = edges.get(cell, 0) + 1
    for nid in sorted(net.nodes):
        cell = grid.cell_of(net.nodes[nid])
        nodes[cell] = nodes.get(cell, 0) + 1
    return {c: edges[c] / nodes[c] for c in edges if nodes.get(c, 0) > 0}


def _poi_proportions(pois, grid: HexGrid) -> dict[CellId, list[float]]:
    counts: dict[CellId, dict[str, int]] = {}
    for p in pois:
        cell = grid.cell_of(p.location)
        counts.setdefault(cell, {})
        counts[cell][p.category] = counts[cell].get(p.category, 0) + 1
    out = {}
    for cell, by_cat in counts.items():
        total = sum(by_cat.values())
        out[cell] = [v / total for v in by_cat.values()]
    return out


def simpson(pois, grid: HexGrid) -> dict[CellId, float]:
    """Simpson diversity 1 - sum(p_i^2) of POI category proportions."""
    return {
        cell: 1.0 - sum(p * p for p in props)
        for cell, props in _poi_proportions(pois, grid).items()
    }


def shannon(pois, grid: HexGrid) -> dict[CellId, float]:
    """Shannon entropy -sum(p_i ln p_i), with 0 ln 0 = 0."""
    return {
        cell: -sum(p * math.log(p) for p in props if p > 0.0)
        for cell, props in _poi_proportions(pois, grid).items()
    }


def _building_cells(b: Building, grid: HexGrid):
    xs = [p[0] for p in b.footprint]
    ys = [p[1] for p in b.footprint]
    return grid.cells_in_bbox(min(xs), min(ys), max(xs), max(ys))


def building_density(buildings, grid: HexGrid) -> dict[CellId, float]:
    """Footprint area inside the cell over cell area; footprints straddling
    a boundary contribute to each side proportionally."""
    area: dict[CellId, float] = {}
    for b in buildings:
        for cell in _building_cells(b, grid):
            a = clipped_area(b.footprint, grid.polygon(cell))
            if a > 0.0:
                area[cell] = area.get(cell, 0.0) + a
    return {c: a / grid.cell_area for c, a in area.items()}


def floor_area_ratio(buildings, grid: HexGrid) -> dict[CellId, float]:
    """Clipped footprint area times floor count, over cell area."""
    far: dict[CellId, float] = {}
    for b in buildings:
        for cell in _building_cells(b, grid):
            a = clipped_area(b.footprint, grid.polygon(cell))
            if a > 0.0:
                far[cell] = far.get(cell, 0.0) + a * b.floors
    return {c: v / grid.cell_area for c, v in far.items()}


def compactness(buildings, grid: HexGrid) -> dict[CellId, float]:
    """Unweighted mean isoperimetric quotient 4*pi*A/P^2, each building
    assigned whole to its centroid's cell (shape is not divisible)."""
    total: dict[CellId, float] = {}
    count: dict[CellId, int] = {}
    for b in buildings:
        q = 4.0 * math.pi * b.area / (b.perimeter**2)
        cell = grid.cell_of(b.centroid)
        total[cell] = total.get(cell, 0.0) + q
        count[cell] = count.get(cell, 0) + 1
    return {c: total[c] / count[c] for c in total}


def compute_factors(
    net: RoadNetwork,
    grid: HexGrid,
    buildings=(),
    pois=(),
    sky_view_params: SkyViewParams | None = None,
) -> FactorTable:
    """All thirteen factors for one network and its environmental layers."""
    return FactorTable(
        node_factors={
            "eccentricity": eccentricity(net),
            "degree": degree_centrality(net),
            "closeness": closeness(net),
            "betweenness": betweenness(net),
            "sky_view": sky_view_factor(net, buildings, sky_view_params),
        },
        cell_factors={
            "avg_road_length": avg_road_length(net, grid),
            "circuity": circuity(net, grid),
            "connectivity": connectivity(net, grid),
            "simpson": simpson(pois, grid),
            "shannon": shannon(pois, grid),
            "building_density": building_density(buildings, grid),
            "floor_area_ratio": floor_area_ratio(buildings, grid),
            "compactness": compactness(buildings, grid),
        },
    )


def dummy_code(table: FactorTable) -> DummyTable:
    """Threshold every factor at its mean over populated keys, strictly."""
    dummies = DummyTable()
    for name, values in table.node_factors.items():
        mean = table.mean_of(name)
        dummies.node_factors[name] = {k: int(v > mean) for k, v in values.items()}
    for name, values in table.cell_factors.items():
        mean = table.mean_of(name)
        dummies.cell_factors[name] = {k: int(v > mean) for k, v in values.items()}
    return dummies


# --- collinearity diagnostics ----------------------------------------------

def correlation_matrix(design: np.ndarray) -> np.ndarray:
    """Pairwise Pearson correlations of the design-matrix columns."""
    design = np.asarray(design, dtype=float)
    return np.corrcoef(design, rowvar=False)


def vif(design: np.ndarray) -> np.ndarray:
    """Variance inflation factor per column: 1/(1-R^2) from regressing the
    column on all others (with intercept). Perfect collinearity maps to
    +inf."""
    design = np.asarray(design, dtype=float)
    n, k = design.shape
    if n < k + 1:
        raise ValueError(f"need at least {k + 1} observations for {k} factors, got {n}")
    if np.any(np.ptp(design, axis=0) == 0.0):
        raise ValueError("constant columns have no defined VIF")
    out = np.empty(k)
    for j in range(k):
        y = design[:, j]
        others = np.delete(design, j, axis=1)
        X = np.column_stack([np.ones(n), others])
        coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
        ss_res = float(resid @ resid)
        centered = y - y.mean()
        ss_tot = float(centered @ centered)
        r2 = 1.0 - ss_res / ss_tot
        out[j] = math.inf if 1.0 - r2 < 1e-12 else 1.0 / (1.0 - r2)
    return out
