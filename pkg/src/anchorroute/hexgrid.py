"""Hexagonal tessellation of the plane and route-to-cell splitting.

Cells are pointy-top hexagons with a configurable circumradius (default
500 m) tiled from a configurable origin; both parameters belong in run
metadata for reproducibility. Cells are addressed by axial coordinates
``(q, r)``; neighboring cell centers sit at distance sqrt(3) * radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .netgraph import EdgeId, RoadNetwork

CellId = tuple[int, int]

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class HexGrid:
    radius: float = 500.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"hexagon circumradius must be positive, got {self.radius}")

    def cell_of(self, point: tuple[float, float]) -> CellId:
        """Deterministic cell assignment of a finite point."""
        x = (point[0] - self.origin[0]) / self.radius
        y = (point[1] - self.origin[1]) / self.radius
        qf = SQRT3 / 3.0 * x - y / 3.0
        rf = 2.0 / 3.0 * y
        return _axial_round(qf, rf)

    def center(self, cell: CellId) -> tuple[float, float]:
        q, r = cell
        x = self.radius * (SQRT3 * q + SQRT3 / 2.0 * r) + self.origin[0]
        y = self.radius * 1.5 * r + self.origin[1]
        return (x, y)

    def polygon(self, cell: CellId) -> tuple[tuple[float, float], ...]:
        """The six corners of a cell, counterclockwise, starting at the top."""
        cx, cy = self.center(cell)
        corners = []
        for k in range(6):
            ang = math.radians(90.0 + 60.0 * k)
            corners.append((cx + self.radius * math.cos(ang), cy + self.radius * math.sin(ang)))
        return tuple(corners)

    @property
    def cell_area(self) -> float:
        return 1.5 * SQRT3 * self.radius * self.radius

    def neighbors(self, cell: CellId) -> tuple[CellId, ...]:
        q, r = cell
        return tuple(
            (q + dq, r + dr) for dq, dr in ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))
        )

    def cells_in_bbox(self, xmin, ymin, xmax, ymax) -> list[CellId]:
        """All cells possibly intersecting the axis-aligned box (superset)."""
        corners = [(xmin, ymin), (xmin, ymax), (xmax, ymin), (xmax, ymax)]
        qs = []
        rs = []
        for p in corners:
            x = (p[0] - self.origin[0]) / self.radius
            y = (p[1] - self.origin[1]) / self.radius
            qs.append(SQRT3 / 3.0 * x - y / 3.0)
            rs.append(2.0 / 3.0 * y)
        out = []
        for q in range(math.floor(min(qs)) - 1, math.ceil(max(qs)) + 2):
            for r in range(math.floor(min(rs)) - 1, math.ceil(max(rs)) + 2):
                out.append((q, r))
        return out


def _axial_round(qf: float, rf: float) -> CellId:
    # cube rounding: project (q, -q-r, r) to the nearest hex center
    xf, zf = qf, rf
    yf = -xf - zf
    rx, ry, rz = round(xf), round(yf), round(zf)
    dx, dy, dz = abs(rx - xf), abs(ry - yf), abs(rz - zf)
    if dx > dy and dx > dz:
        rx = -ry - rz
    elif dy > dz:
        ry = -rx - rz
    else:
        rz = -rx - ry
    return (int(rx), int(rz))


def point_along(geometry, fraction: float) -> tuple[float, float]:
    """Point at a given fraction of a polyline's arc length."""
    total = sum(math.dist(geometry[i], geometry[i + 1]) for i in range(len(geometry) - 1))
    if total == 0.0:
        return geometry[0]
    target = fraction * total
    run = 0.0
    for i in range(len(geometry) - 1):
        seg = math.dist(geometry[i], geometry[i + 1])
        if run + seg >= target or i == len(geometry) - 2:
            t = 0.0 if seg == 0.0 else (target - run) / seg
            t = min(max(t, 0.0), 1.0)
            (x0, y0), (x1, y1) = geometry[i], geometry[i + 1]
            return (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
        run += seg
    return geometry[-1]


# Segments shorter than this are assigned whole to their midpoint's cell;
# hex cells are convex, so a segment with both endpoints in one cell lies
# entirely inside it and the split below is exact above this resolution.
_MIN_SPLIT = 1e-9


def _split_segment(grid, ax, ay, bx, by, seglen, acc):
    ca = grid.cell_of((ax, ay))
    cb = grid.cell_of((bx, by))
    if ca == cb or seglen <= _MIN_SPLIT:
        acc[ca] = acc.get(ca, 0.0) + seglen
        return
    mx, my = 0.5 * (ax + bx), 0.5 * (ay + by)
    half = seglen * 0.5
    _split_segment(grid, ax, ay, mx, my, half, acc)
    _split_segment(grid, mx, my, bx, by, half, acc)


def cells_along(route, grid: HexGrid, net: RoadNetwork) -> list[tuple[CellId, float]]:
    """Split a connected edge sequence over the cells it traverses.

    Returns (cell, traversed meters) pairs in first-touch order. Each
    edge's declared length is distributed proportionally to the geometric
    sub-lengths, so the per-cell lengths sum to the route length.
    """
    route = list(route)
    for a, b in zip(route, route[1:]):
        if net.edges[a].head != net.edges[b].tail:
            raise ValueError(f"route edges {a} -> {b} are not connected")
    acc: dict[CellId, float] = {}
    for eid in route:
        geom = net.edge_geometry(eid)
        geom_len = sum(math.dist(geom[i], geom[i + 1]) for i in range(len(geom) - 1))
        edge_len = net.edges[eid].length
        per_edge: dict[CellId, float] = {}
        if geom_len == 0.0:
            cell = grid.cell_of(geom[0])
            per_edge[cell] = edge_len
        else:
            for i in range(len(geom) - 1):
                (ax, ay), (bx, by) = geom[i], geom[i + 1]
                seglen = math.dist(geom[i], geom[i + 1])
                if seglen > 0.0:
                    _split_segment(grid, ax, ay, bx, by, seglen, per_edge)
            scale = edge_len / geom_len
            per_edge = {c: v * scale for c, v in per_edge.items()}
        for cell, meters in per_edge.items():
            acc[cell] = acc.get(cell, 0.0) + meters
    return list(acc.items())
