"""Road-network data model and file ingestion.

Networks live in planar projected coordinates (meters). Geographic
reprojection is the caller's responsibility: every downstream metric is
metric. Objects are immutable after load and safe to share across threads.

File formats (UTF-8, ``#`` starts a comment line):

* network:   ``N id x y`` node lines, ``E id tail head length [speed]``
  edge lines, optional ``G id x1 y1 x2 y2 ...`` polyline geometry lines.
* buildings: one JSON object per line,
  ``{"footprint": [[x, y], ...], "floors": n, "height": h?}``.
* POIs:      one JSON object per line, ``{"location": [x, y], "category": c}``.
* trips:     ``T depart occupied edge,edge,... [edge:speed,edge:speed,...]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

NodeId = int
EdgeId = int

DEFAULT_POI_CATEGORIES = (
    "residential",
    "commercial",
    "transportation",
    "industrial",
    "public",
    "parks",
)


class NetworkFormatError(ValueError):
    """Raised on malformed or inconsistent network/trip/layer files."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Edge:
    tail: NodeId
    head: NodeId
    length: float
    speed: float | None = None
    geometry: tuple[tuple[float, float], ...] | None = None

    @property
    def duration(self) -> float | None:
        """Traversal time in seconds, or None when no speed is known."""
        if self.speed is None:
            return None
        return self.length / self.speed


def polyline_length(points) -> float:
    return sum(
        math.dist(points[i], points[i + 1]) for i in range(len(points) - 1)
    )


class RoadNetwork:
    """Directed weighted road graph; may contain parallel edges.

    Adjacency indexes are built once at construction and the instance is
    treated as immutable afterwards.
    """

    def __init__(self, nodes: dict[NodeId, tuple[float, float]], edges: dict[EdgeId, Edge]):
        self.nodes = dict(nodes)
        self.edges = dict(edges)
        self._validate()
        self.out_edges: dict[NodeId, tuple[EdgeId, ...]] = {n: () for n in self.nodes}
        self.in_edges: dict[NodeId, tuple[EdgeId, ...]] = {n: () for n in self.nodes}
        out: dict[NodeId, list[EdgeId]] = {n: [] for n in self.nodes}
        inc: dict[NodeId, list[EdgeId]] = {n: [] for n in self.nodes}
        for eid in sorted(self.edges):
            e = self.edges[eid]
            out[e.tail].append(eid)
            inc[e.head].append(eid)
        self.out_edges = {n: tuple(v) for n, v in out.items()}
        self.in_edges = {n: tuple(v) for n, v in inc.items()}

    def _validate(self):
        for eid, e in self.edges.items():
            if e.tail not in self.nodes:
                raise NetworkFormatError(f"edge {eid} references missing tail node {e.tail}")
            if e.head not in self.nodes:
                raise NetworkFormatError(f"edge {eid} references missing head node {e.head}")
            if not (e.length > 0):
                raise NetworkFormatError(f"edge {eid} has nonpositive length {e.length}")
            if e.speed is not None and not (e.speed > 0 and math.isfinite(e.speed)):
                raise NetworkFormatError(f"edge {eid} has invalid speed {e.speed}")
            if e.geometry is not None:
                if len(e.geometry) < 2:
                    raise NetworkFormatError(f"edge {eid} geometry needs >= 2 points")
                if e.geometry[0] != self.nodes[e.tail] or e.geometry[-1] != self.nodes[e.head]:
                    raise NetworkFormatError(
                        f"edge {eid} geometry endpoints do not match tail/head coordinates"
                    )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_geometry(self, eid: EdgeId) -> tuple[tuple[float, float], ...]:
        """Polyline of an edge; straight tail->head segment when absent."""
        e = self.edges[eid]
        if e.geometry is not None:
            return e.geometry
        return (self.nodes[e.tail], self.nodes[e.head])

    def edge_duration(self, eid: EdgeId) -> float:
        d = self.edges[eid].duration
        if d is None:
            raise ValueError(f"edge {eid} has no speed; run speed estimation first")
        return d

    def with_speeds(self, speeds: dict[EdgeId, float]) -> "RoadNetwork":
        """New network with the given edge speeds (durations follow)."""
        new_edges = {}
        for eid, e in self.edges.items():
            if eid in speeds:
                new_edges[eid] = replace(e, speed=float(speeds[eid]))
            else:
                new_edges[eid] = e
        return RoadNetwork(self.nodes, new_edges)

    def total_length(self) -> float:
        return sum(e.length for e in self.edges.values())


@dataclass(frozen=True)
class Building:
    """Closed building footprint with floor count and optional height."""

    footprint: tuple[tuple[float, float], ...]
    floors: int = 1
    height: float | None = None

    def __post_init__(self):
        ring = self.footprint
        if len(ring) < 3:
            raise NetworkFormatError("footprint needs at least 3 vertices")
        if ring[0] == ring[-1]:
            object.__setattr__(self, "footprint", ring[:-1])
        if self.floors < 1:
            raise NetworkFormatError(f"floors must be >= 1, got {self.floors}")
        if self.area <= 0:
            raise NetworkFormatError("footprint has nonpositive area")

    @property
    def area(self) -> float:
        return abs(signed_area(self.footprint))

    @property
    def perimeter(self) -> float:
        ring = self.footprint
        return sum(math.dist(ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring)))

    @property
    def centroid(self) -> tuple[float, float]:
        ring = self.footprint
        a = signed_area(ring)
        cx = cy = 0.0
        for i in range(len(ring)):
            x0, y0 = ring[i]
            x1, y1 = ring[(i + 1) % len(ring)]
            cross = x0 * y1 - x1 * y0
            cx += (x0 + x1) * cross
            cy += (y0 + y1) * cross
        return (cx / (6.0 * a), cy / (6.0 * a))


def signed_area(ring) -> float:
    a = 0.0
    for i in range(len(ring)):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % len(ring)]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


@dataclass(frozen=True)
class Poi:
    location: tuple[float, float]
    category: str


@dataclass(frozen=True)
class Trip:
    """One matched trajectory: an edge sequence plus optional speed samples."""

    edges: tuple[EdgeId, ...]
    depart: float
    occupied: bool = True
    speed_samples: tuple[tuple[EdgeId, float], ...] = field(default=())

    def __post_init__(self):
        if not self.edges:
            raise NetworkFormatError("trip has empty edge sequence")


def validate_trip(trip: Trip, net: RoadNetwork):
    """Check that the trip's edges exist and chain head-to-tail."""
    for eid in trip.edges:
        if eid not in net.edges:
            raise NetworkFormatError(f"trip references unknown edge {eid}")
    for a, b in zip(trip.edges, trip.edges[1:]):
        if net.edges[a].head != net.edges[b].tail:
            raise NetworkFormatError(f"trip edges {a} -> {b} are not connected")
    for eid, speed in trip.speed_samples:
        if eid not in net.edges:
            raise NetworkFormatError(f"speed sample references unknown edge {eid}")
        if not (speed >= 0 and math.isfinite(speed)):
            raise NetworkFormatError(f"speed sample on edge {eid} is negative or non-finite")


def trip_length(trip: Trip, net: RoadNetwork) -> float:
    return sum(net.edges[e].length for e in trip.edges)


def trip_duration(trip: Trip, net: RoadNetwork) -> float:
    return sum(net.edge_duration(e) for e in trip.edges)


def filter_trips(
    trips,
    net: RoadNetwork,
    duration_bounds: tuple[float, float] = (300.0, 18000.0),
    length_bounds: tuple[float, float] = (1000.0, 50000.0),
) -> list[Trip]:
    """Keep trips whose total duration and length fall inside the bounds.

    Bounds are inclusive. Durations need edge speeds, so run speed
    estimation before filtering.
    """
    kept = []
    for trip in trips:
        validate_trip(trip, net)
        dur = trip_duration(trip, net)
        length = trip_length(trip, net)
        if duration_bounds[0] <= dur <= duration_bounds[1] and length_bounds[0] <= length <= length_bounds[1]:
            kept.append(trip)
    return kept


# --- file ingestion -------------------------------------------------------

def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_network(path) -> RoadNetwork:
    """Parse a network file, validating all structural invariants."""
    nodes: dict[NodeId, tuple[float, float]] = {}
    raw_edges: dict[EdgeId, tuple] = {}
    geoms: dict[EdgeId, tuple[tuple[float, float], ...]] = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "N":
                nid = int(parts[1])
                if nid in nodes:
                    raise NetworkFormatError(f"duplicate node id {nid}", lineno)
                nodes[nid] = (float(parts[2]), float(parts[3]))
            elif kind == "E":
                eid = int(parts[1])
                if eid in raw_edges:
                    raise NetworkFormatError(f"duplicate edge id {eid}", lineno)
                tail, head = int(parts[2]), int(parts[3])
                length = float(parts[4])
                speed = float(parts[5]) if len(parts) > 5 else None
                raw_edges[eid] = (tail, head, length, speed)
            elif kind == "G":
                eid = int(parts[1])
                coords = [float(v) for v in parts[2:]]
                if len(coords) < 4 or len(coords) % 2:
                    raise NetworkFormatError(f"geometry for edge {eid} malformed", lineno)
                geoms[eid] = tuple(zip(coords[::2], coords[1::2]))
            else:
                raise NetworkFormatError(f"unknown record kind {kind!r}", lineno)
        except NetworkFormatError:
            raise
        except (ValueError, IndexError) as exc:
            raise NetworkFormatError(f"cannot parse {line!r}: {exc}", lineno) from None
    edges = {}
    for eid, (tail, head, length, speed) in raw_edges.items():
        edges[eid] = Edge(tail, head, length, speed, geoms.get(eid))
    for eid in geoms:
        if eid not in raw_edges:
            raise NetworkFormatError(f"geometry for unknown edge {eid}")
    return RoadNetwork(nodes, edges)


def save_network(net: RoadNetwork, path):
    """Write a network file that round-trips bit-exactly through load."""
    with open(path, "w", encoding="utf-8") as fh:
        for nid in sorted(net.nodes):
            x, y = net.nodes[nid]
            fh.write(f"N {nid} {x!r} {y!r}\n")
        for eid in sorted(net.edges):
            e = net.edges[eid]
            line = f"E {eid} {e.tail} {e.head} {e.length!r}"
            if e.speed is not None:
                line += f" {e.speed!r}"
            fh.write(line + "\n")
        for eid in sorted(net.edges):
            g = net.edges[eid].geometry
            if g is not None:
                coords = " ".join(f"{x!r} {y!r}" for x, y in g)
                fh.write(f"G {eid} {coords}\n")


def load_buildings(path) -> list[Building]:
    buildings = []
    for lineno, line in _data_lines(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(f"bad JSON: {exc}", lineno) from None
        b = Building(
            footprint=tuple((float(x), float(y)) for x, y in obj["footprint"]),
            floors=int(obj.get("floors", 1)),
            height=float(obj["height"]) if obj.get("height") is not None else None,
        )
        for key, got in (("area", b.area), ("perimeter", b.perimeter)):
            if key in obj and not math.isclose(obj[key], got, rel_tol=1e-6):
                raise NetworkFormatError(
                    f"declared {key} {obj[key]} inconsistent with footprint ({got})", lineno
                )
        buildings.append(b)
    return buildings


def save_buildings(buildings, path):
    with open(path, "w", encoding="utf-8") as fh:
        for b in buildings:
            obj = {"footprint": [[x, y] for x, y in b.footprint], "floors": b.floors}
            if b.height is not None:
                obj["height"] = b.height
            fh.write(json.dumps(obj) + "\n")


def load_pois(path, categories=DEFAULT_POI_CATEGORIES) -> list[Poi]:
    cats = set(categories)
    pois = []
    for lineno, line in _data_lines(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(f"bad JSON: {exc}", lineno) from None
        cat = obj["category"]
        if cat not in cats:
            raise NetworkFormatError(f"unknown POI category {cat!r}", lineno)
        loc = obj["location"]
        pois.append(Poi((float(loc[0]), float(loc[1])), cat))
    return pois


def save_pois(pois, path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in pois:
            fh.write(json.dumps({"location": list(p.location), "category": p.category}) + "\n")


def load_trips(path, net: RoadNetwork | None = None) -> list[Trip]:
    trips = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if parts[0] != "T":
            raise NetworkFormatError(f"unknown record kind {parts[0]!r}", lineno)
        try:
            depart = float(parts[1])
            occupied = bool(int(parts[2]))
            edges = tuple(int(v) for v in parts[3].split(","))
            samples = ()
            if len(parts) > 4:
                samples = tuple(
                    (int(tok.split(":")[0]), float(tok.split(":")[1]))
                    for tok in parts[4].split(",")
                )
        except (ValueError, IndexError) as exc:
            raise NetworkFormatError(f"cannot parse {line!r}: {exc}", lineno) from None
        trip = Trip(edges=edges, depart=depart, occupied=occupied, speed_samples=samples)
        if net is not None:
            validate_trip(trip, net)
        trips.append(trip)
    return trips


def save_trips(trips, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in trips:
            line = f"T {t.depart!r} {int(t.occupied)} " + ",".join(str(e) for e in t.edges)
            if t.speed_samples:
                line += " " + ",".join(f"{e}:{s!r}" for e, s in t.speed_samples)
            fh.write(line + "\n")
