"""Synthetic worlds and simulated route choices for verification.

A grid city stands in for a real road network: a lattice with jittered
per-edge speeds, an optional fast peripheral ring (longer, curved edges
with a speed premium, which reproduces the detour-versus-time trade-off),
and seeded buildings and POIs whose density rises toward the center so
every environmental factor varies spatially. Choices are then sampled
from the model at known parameters, giving ground truth for parameter
recovery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import shortestpaths
from .anchors import AnchorPartition, louvain
from .choiceset import ChoiceSet, Route, UndersizedChoiceSetError, build_choice_set
from .complexity import DummyTable, SkyViewParams, compute_factors, dummy_code
from .features import Dataset, ModelVariant, build_dataset
from .hexgrid import HexGrid
from .netgraph import Building, Edge, Poi, RoadNetwork, Trip
from .cnpsl import ModelSpec, Params, choice_probabilities, spec_for

DEFAULT_POI_CATEGORIES = (
    "residential",
    "commercial",
    "transportation",
    "industrial",
    "public",
    "parks",
)

# flagship generating coefficients, at the magnitudes a full model fit on
# real taxi data produces: feature order is length_km, duration_min,
# intersection, then the 13 factors in canonical order
DEFAULT_TRUE_BETA = (
    0.687, -0.256, -0.051,
    -0.31, 0.12, -0.011, 0.003, 0.365, 0.532, 0.183,
    0.321, 0.025, 0.263, -0.324, -0.107, 0.049,
)
DEFAULT_TRUE_BETA_PS = -0.649
DEFAULT_TRUE_THETA = 0.85  # shared nest scale ~0.70 after the logistic


@dataclass
class GridCity:
    net: RoadNetwork
    buildings: list[Building]
    pois: list[Poi]
    rows: int
    cols: int
    spacing: float
    ring: bool
    seed: int

    def node_at(self, row: int, col: int) -> int:
        return row * self.cols + col


def make_grid_city(
    rows: int,
    cols: int,
    spacing: float = 500.0,
    ring: bool = False,
    seed: int = 0,
    base_speed: float = 8.0,
    speed_jitter: float = 0.15,
    ring_speed_factor: float = 2.2,
    ring_detour: float = 1.15,
    buildings_per_block: float = 2.0,
    pois_per_block: float = 4.0,
) -> GridCity:
    """Seeded lattice city; identical seeds produce identical worlds."""
    rng = np.random.default_rng(seed)
    nodes = {}
    for r in range(rows):
        for c in range(cols):
            nodes[r * cols + c] = (c * spacing, r * spacing)

    cx = (cols - 1) * spacing / 2.0
    cy = (rows - 1) * spacing / 2.0
    bulge = 0.5 * spacing * math.sqrt(ring_detour**2 - 1.0)

    edges = {}
    eid = 0
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            for dr, dc in ((0, 1), (1, 0)):
                r2, c2 = r + dr, c + dc
                if r2 >= rows or c2 >= cols:
                    continue
                v = r2 * cols + c2
                along_top_or_bottom = r == r2 and r in (0, rows - 1)
                along_left_or_right = c == c2 and c in (0, cols - 1)
                is_ring = ring and (along_top_or_bottom or along_left_or_right)
                if is_ring:
                    (x0, y0), (x1, y1) = nodes[u], nodes[v]
                    mx, my = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
                    nx, ny = mx - cx, my - cy
                    norm = math.hypot(nx, ny) or 1.0
                    mid = (mx + bulge * nx / norm, my + bulge * ny / norm)
                    length = math.dist((x0, y0), mid) + math.dist(mid, (x1, y1))
                    for tail, head, geom in (
                        (u, v, (nodes[u], mid, nodes[v])),
                        (v, u, (nodes[v], mid, nodes[u])),
                    ):
                        speed = (
                            base_speed
                            * ring_speed_factor
                            * math.exp(rng.normal(0.0, speed_jitter))
                        )
                        edges[eid] = Edge(tail, head, length, speed, geom)
                        eid += 1
                else:
                    for tail, head in ((u, v), (v, u)):
                        speed = base_speed * math.exp(rng.normal(0.0, speed_jitter))
                        edges[eid] = Edge(tail, head, spacing, speed)
                        eid += 1

    net = RoadNetwork(nodes, edges)
    buildings = _seed_buildings(rng, rows, cols, spacing, cx, cy, buildings_per_block)
    pois = _seed_pois(rng, rows, cols, spacing, cx, cy, pois_per_block)
    return GridCity(net, buildings, pois, rows, cols, spacing, ring, seed)


def _seed_buildings(rng, rows, cols, spacing, cx, cy, per_block):
    max_dist = math.hypot(cx, cy) or 1.0
    buildings = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            bx, by = c * spacing, r * spacing
            centrality = 1.0 - math.hypot(bx + spacing / 2 - cx, by + spacing / 2 - cy) / max_dist
            n = rng.poisson(per_block * (0.5 + centrality))
            for _ in range(n):
                w = rng.uniform(15.0, 60.0)
                h = rng.uniform(15.0, 60.0)
                x0 = bx + rng.uniform(0.1, 0.9) * spacing
                y0 = by + rng.uniform(0.1, 0.9) * spacing
                floors = 1 + rng.poisson(2.0 + 8.0 * centrality)
                height = float(floors) * 3.0 if rng.random() < 0.3 else None
                buildings.append(
                    Building(
                        footprint=((x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)),
                        floors=int(floors),
                        height=height,
                    )
                )
    return buildings


def _seed_pois(rng, rows, cols, spacing, cx, cy, per_block):
    max_dist = math.hypot(cx, cy) or 1.0
    cats = DEFAULT_POI_CATEGORIES
    pois = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            bx, by = c * spacing, r * spacing
            centrality = 1.0 - math.hypot(bx + spacing / 2 - cx, by + spacing / 2 - cy) / max_dist
            n = rng.poisson(per_block * (0.5 + centrality))
            # central blocks mix categories, peripheral ones are near-pure
            conc = 0.3 + 4.0 * centrality
            weights = rng.dirichlet(np.full(len(cats), conc))
            for _ in range(n):
                x = bx + rng.uniform(0.0, 1.0) * spacing
                y = by + rng.uniform(0.0, 1.0) * spacing
                cat = cats[int(rng.choice(len(cats), p=weights))]
                pois.append(Poi((x, y), cat))
    return pois


@dataclass
class SimulatedWorld:
    """Everything the simulation derived from a city, plus ground truth."""

    city: GridCity
    grid: HexGrid
    dummies: DummyTable
    partition: AnchorPartition
    choice_sets: list[ChoiceSet]
    dataset: Dataset
    spec: ModelSpec
    true_params: Params
    seed: int
    meta: dict = field(default_factory=dict)


def default_true_params(spec: ModelSpec) -> Params:
    """The flagship generating parameters, shaped to a spec."""
    beta = np.zeros(spec.n_features)
    for i in range(spec.n_features):
        beta[i] = DEFAULT_TRUE_BETA[i] if i < len(DEFAULT_TRUE_BETA) else 0.0
    theta = np.full(spec.n_scales, DEFAULT_TRUE_THETA)
    return Params(beta=beta, beta_ps=DEFAULT_TRUE_BETA_PS, theta=theta)


def _perturbed_route(net, adj_template, od, rng, sigma):
    """Shortest path under log-normally jittered durations: a stand-in for
    an observed driven route."""
    adj = {
        u: tuple((v, w * math.exp(rng.normal(0.0, sigma)), e) for v, w, e in nbrs)
        for u, nbrs in adj_template.items()
    }
    found = shortestpaths.shortest_path(adj, od[0], od[1])
    if found is None:
        return None
    return Route.from_edges(found[2], net)


def sample_od_pairs(city: GridCity, n: int, rng, min_separation: int = 3):
    """Distinct OD pairs at a minimum grid separation, seeded."""
    pairs = []
    for o in range(city.rows * city.cols):
        ro, co = divmod(o, city.cols)
        for d in range(city.rows * city.cols):
            rd, cd = divmod(d, city.cols)
            if abs(ro - rd) + abs(co - cd) >= min_separation:
                pairs.append((o, d))
    if n > len(pairs):
        raise ValueError(f"cannot sample {n} OD pairs from {len(pairs)} candidates")
    idx = rng.choice(len(pairs), size=n, replace=False)
    return [pairs[i] for i in idx]


def simulate_choices(
    city: GridCity,
    true_params: Params | None = None,
    n_obs: int = 1000,
    seed: int = 0,
    variant: ModelVariant = ModelVariant.FULL,
    grid: HexGrid | None = None,
    resolution: float = 1.0,
    min_size: int = 5,
    threshold: float = 0.4,
    k_cap: int = 80,
    observed_draws: int = 4,
    perturb_sigma: float = 0.7,
    min_separation: int = 3,
    sky_view_params: SkyViewParams | None = None,
    scale_mode: str | None = None,
) -> SimulatedWorld:
    """Build choice sets on a synthetic city and sample choices from the
    model at known parameters.

    Deterministic for a given seed: OD sampling, observed-route jitter,
    and choice draws all derive from one seed sequence.
    """
    variant = ModelVariant(variant)
    net = city.net
    grid = grid or HexGrid(radius=max(city.spacing, 1.0))
    factors = compute_factors(net, grid, city.buildings, city.pois, sky_view_params)
    dummies = dummy_code(factors)
    partition = louvain(net, resolution=resolution, seed=seed)

    root = np.random.default_rng(seed)
    od_rng = np.random.default_rng(root.integers(2**63))
    candidates = sample_od_pairs(city, min(2 * n_obs, _max_pairs(city, min_separation)), od_rng, min_separation)
    adj_template = shortestpaths.adjacency(net, "duration")

    choice_sets = []
    seeds = np.random.SeedSequence(seed).spawn(len(candidates))
    for od, child in zip(candidates, seeds):
        if len(choice_sets) >= n_obs:
            break
        rng = np.random.default_rng(child)
        observed = []
        edge_sets = set()
        for _ in range(observed_draws):
            route = _perturbed_route(net, adj_template, od, rng, perturb_sigma)
            if route is not None and route.edges not in edge_sets:
                edge_sets.add(route.edges)
                observed.append(route)
        try:
            cs = build_choice_set(
                net,
                od,
                observed,
                min_size=min_size,
                threshold=threshold,
                k_cap=k_cap,
                chosen=None,
            )
        except UndersizedChoiceSetError:
            continue
        cs.depart = float(rng.uniform(0.0, 86400.0))
        cs.occupied = bool(rng.random() < 0.75)
        cs.chosen = 0  # placeholder until the draw below
        choice_sets.append(cs)

    if len(choice_sets) < n_obs:
        raise ValueError(
            f"only {len(choice_sets)} of {n_obs} requested choice sets could be built"
        )

    dataset = build_dataset(choice_sets, dummies, partition, grid, net, variant)
    spec = spec_for(dataset, scale_mode)
    params = true_params or default_true_params(spec)
    if params.to_vector().shape != (spec.n_params,):
        raise ValueError("true parameters do not match the variant's spec")

    draw_seeds = np.random.SeedSequence(seed + 1).spawn(len(choice_sets))
    for cs, obs, child in zip(choice_sets, dataset.observations, draw_seeds):
        probs = choice_probabilities(obs.x, obs.ln_ps, obs.alpha, params, spec)
        rng = np.random.default_rng(child)
        chosen = int(rng.choice(len(probs), p=probs / probs.sum()))
        cs.chosen = chosen
        obs.chosen = chosen
        obs.chosen_length = cs.routes[chosen].length

    return SimulatedWorld(
        city=city,
        grid=grid,
        dummies=dummies,
        partition=partition,
        choice_sets=choice_sets,
        dataset=dataset,
        spec=spec,
        true_params=params,
        seed=seed,
        meta={
            "variant": int(variant),
            "n_obs": len(choice_sets),
            "threshold": threshold,
            "k_cap": k_cap,
            "resolution": resolution,
        },
    )


def _max_pairs(city, min_separation):
    count = 0
    for o in range(city.rows * city.cols):
        ro, co = divmod(o, city.cols)
        for d in range(city.rows * city.cols):
            rd, cd = divmod(d, city.cols)
            if abs(ro - rd) + abs(co - cd) >= min_separation:
                count += 1
    return count


def make_trips(
    city: GridCity,
    n: int,
    seed: int = 0,
    perturb_sigma: float = 0.5,
    sample_noise: float = 0.1,
    min_separation: int = 3,
) -> list[Trip]:
    """Synthetic matched trajectories with per-edge speed samples, for
    exercising the speed-estimation stage."""
    rng = np.random.default_rng(seed)
    ods = sample_od_pairs(city, min(n, _max_pairs(city, min_separation)), rng, min_separation)
    adj = shortestpaths.adjacency(city.net, "duration")
    trips = []
    for od in ods[:n]:
        route = _perturbed_route(city.net, adj, od, rng, perturb_sigma)
        if route is None:
            continue
        samples = tuple(
            (e, max(0.0, city.net.edges[e].speed * math.exp(rng.normal(0.0, sample_noise))))
            for e in route.edges
        )
        trips.append(
            Trip(
                edges=route.edges,
                depart=float(rng.uniform(0.0, 86400.0)),
                occupied=bool(rng.random() < 0.75),
                speed_samples=samples,
            )
        )
    return trips
