"""End-to-end orchestration: staged runs from a declarative config file.

Stages run in a fixed order (speeds, metrics, anchors, choiceset,
features, fit), each reading the previous stage's files and writing its
own, plus a manifest of parameter values and content hashes of every
input and output. Reruns with an identical config produce byte-identical
outputs regardless of worker count. Every constant the method leaves
open (thresholds, grid radius, sky-view discretization, units, caps)
lives in the config with its default.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import complexity, netgraph, synth, traffic
from .anchors import AnchorPartition, cohesion_report, louvain
from .choiceset import ChoiceSet, Route, UndersizedChoiceSetError, build_choice_set
from .cnpsl import FitOptions, FitResult, ModelSpec, fit, spec_for
from .complexity import DummyTable, FactorTable, SkyViewParams
from .features import Dataset, ModelVariant, Observation, build_dataset
from .hexgrid import HexGrid
from .netgraph import RoadNetwork


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


DEFAULT_CONFIG = {
    "run": {"workdir": "out"},
    "grid": {"radius": 500.0, "origin": [0.0, 0.0]},
    "trips": {"duration_bounds": [300.0, 18000.0], "length_bounds": [1000.0, 50000.0]},
    "metrics": {"sky_sectors": 16, "sky_radius": 100.0, "floor_height": 3.0},
    "anchors": {"resolution": 1.0, "seed": 0},
    "choiceset": {"min_size": 5, "threshold": 0.4, "k_cap": 50, "weight": "duration"},
    "features": {"variant": 4},
    "fit": {"scale_mode": "", "max_iter": 500, "use_multiplicity": False},
    "stratify": {"by": "distance"},
}


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        user = tomllib.load(fh)
    cfg = {section: dict(values) for section, values in DEFAULT_CONFIG.items()}
    for section, values in user.items():
        cfg.setdefault(section, {})
        if isinstance(values, dict):
            cfg[section].update(values)
        else:
            cfg[section] = values
    return cfg


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def grid_from_config(cfg) -> HexGrid:
    g = cfg["grid"]
    return HexGrid(radius=float(g["radius"]), origin=tuple(g["origin"]))


# --- table serialization ----------------------------------------------------

def _cell_str(cell) -> str:
    return f"{cell[0]},{cell[1]}"


def _parse_cell(s) -> tuple[int, int]:
    q, r = s.split(",")
    return (int(q), int(r))


def write_speeds(path, net: RoadNetwork):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# edge_id speed duration\n")
        for eid in sorted(net.edges):
            e = net.edges[eid]
            fh.write(f"{eid} {e.speed!r} {e.duration!r}\n")


def read_speeds(path) -> dict[int, float]:
    speeds = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            speeds[int(parts[0])] = float(parts[1])
    return speeds


def write_factor_tables(workdir: Path, factors: FactorTable, meta: dict):
    with open(workdir / "node_metrics.tsv", "w", encoding="utf-8") as fh:
        fh.write("# node_id factor value\n")
        for name in complexity.NODE_FACTORS:
            for nid in sorted(factors.node_factors[name]):
                fh.write(f"{nid}\t{name}\t{factors.node_factors[name][nid]!r}\n")
    with open(workdir / "cell_metrics.tsv", "w", encoding="utf-8") as fh:
        fh.write("# cell_id factor value\n")
        for name in complexity.CELL_FACTORS:
            for cell in sorted(factors.cell_factors[name]):
                fh.write(f"{_cell_str(cell)}\t{name}\t{factors.cell_factors[name][cell]!r}\n")
    with open(workdir / "metrics_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_factor_tables(workdir: Path) -> FactorTable:
    table = FactorTable(
        node_factors={n: {} for n in complexity.NODE_FACTORS},
        cell_factors={n: {} for n in complexity.CELL_FACTORS},
    )
    with open(workdir / "node_metrics.tsv", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            nid, name, value = line.split("\t")
            table.node_factors[name][int(nid)] = float(value)
    with open(workdir / "cell_metrics.tsv", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cell, name, value = line.split("\t")
            table.cell_factors[name][_parse_cell(cell)] = float(value)
    return table


def write_partition(workdir: Path, partition: AnchorPartition, report: dict):
    with open(workdir / "node_anchors.tsv", "w", encoding="utf-8") as fh:
        fh.write("# node_id anchor_id\n")
        for nid in sorted(partition.node_to_anchor):
            fh.write(f"{nid}\t{partition.node_to_anchor[nid]}\n")
    with open(workdir / "edge_anchors.tsv", "w", encoding="utf-8") as fh:
        fh.write("# edge_id anchor_id\n")
        for eid in sorted(partition.edge_to_anchor):
            fh.write(f"{eid}\t{partition.edge_to_anchor[eid]}\n")
    with open(workdir / "anchors_meta.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_partition(workdir: Path) -> AnchorPartition:
    node_to_anchor = {}
    edge_to_anchor = {}
    with open(workdir / "node_anchors.tsv", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            nid, aid = line.split("\t")
            node_to_anchor[int(nid)] = int(aid)
    with open(workdir / "edge_anchors.tsv", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            eid, aid = line.split("\t")
            edge_to_anchor[int(eid)] = int(aid)
    with open(workdir / "anchors_meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    return AnchorPartition(
        node_to_anchor=node_to_anchor,
        edge_to_anchor=edge_to_anchor,
        modularity=meta["modularity"],
    )


def write_choice_sets(path, choice_sets):
    with open(path, "w", encoding="utf-8") as fh:
        for cs in choice_sets:
            fh.write(
                json.dumps(
                    {
                        "od": list(cs.od),
                        "routes": [list(r.edges) for r in cs.routes],
                        "chosen": cs.chosen,
                        "provenance": cs.provenance,
                        "multiplicity": cs.multiplicity,
                        "depart": cs.depart,
                        "occupied": cs.occupied,
                    }
                )
                + "\n"
            )


def read_choice_sets(path, net: RoadNetwork) -> list[ChoiceSet]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                ChoiceSet(
                    od=tuple(obj["od"]),
                    routes=[Route.from_edges(e, net) for e in obj["routes"]],
                    chosen=obj["chosen"],
                    provenance=obj["provenance"],
                    multiplicity=obj["multiplicity"],
                    depart=obj.get("depart"),
                    occupied=obj.get("occupied"),
                )
            )
    return out


def write_features(path, dataset: Dataset):
    names = dataset.feature_names
    header = (
        ["set", "route", "chosen", "multiplicity"]
        + names
        + ["ln_path_size", "alpha", "od", "depart", "occupied"]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for i, obs in enumerate(dataset.observations):
            for j in range(obs.n_routes):
                alpha = ";".join(f"{a}:{v!r}" for a, v in sorted(obs.alpha[j].items()))
                row = [
                    str(i),
                    str(j),
                    str(int(j == obs.chosen)),
                    str(obs.multiplicity[j]),
                    *(repr(float(v)) for v in obs.x[j]),
                    repr(float(obs.ln_ps[j])),
                    alpha,
                    f"{obs.od[0]},{obs.od[1]}",
                    "" if obs.depart is None else repr(obs.depart),
                    "" if obs.occupied is None else str(int(obs.occupied)),
                ]
                fh.write("\t".join(row) + "\n")


def read_features(path, variant: ModelVariant | None = None) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split("\t")
        names = header[4 : header.index("ln_path_size")]
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    by_set: dict[int, list] = {}
    for row in rows:
        by_set.setdefault(int(row[0]), []).append(row)
    observations = []
    for i in sorted(by_set):
        group = sorted(by_set[i], key=lambda r: int(r[1]))
        x = np.array([[float(v) for v in r[4 : 4 + len(names)]] for r in group])
        ln_ps = np.array([float(r[4 + len(names)]) for r in group])
        alpha = []
        for r in group:
            entries = r[5 + len(names)].split(";")
            alpha.append({int(e.split(":")[0]): float(e.split(":")[1]) for e in entries})
        chosen = [int(r[2]) for r in group].index(1)
        od = tuple(int(v) for v in group[0][6 + len(names)].split(","))
        depart = float(group[0][7 + len(names)]) if group[0][7 + len(names)] else None
        occupied = bool(int(group[0][8 + len(names)])) if group[0][8 + len(names)] else None
        observations.append(
            Observation(
                x=x,
                ln_ps=ln_ps,
                alpha=alpha,
                chosen=chosen,
                od=od,
                multiplicity=[int(r[3]) for r in group],
                depart=depart,
                occupied=occupied,
                chosen_length=None,
            )
        )
    if variant is None:
        has_env = len(names) > 3
        has_anchors = any(
            set(o.alpha[0]) != {0} or len(o.alpha[0]) > 1 for o in observations
        )
        variant = ModelVariant(1 + has_env + 2 * has_anchors)
    return Dataset(feature_names=list(names), observations=observations, variant=variant)


# --- stratification ---------------------------------------------------------

TIME_PERIODS = ((23, 6), (6, 11), (11, 14), (14, 18), (18, 23))
DISTANCE_BOUNDS = (10000.0, 20000.0)


def stratify(dataset: Dataset, by: str, bounds=None) -> list[tuple[str, Dataset]]:
    """Partition observations by departure period, chosen-route length, or
    occupancy; every observation lands in exactly one stratum."""
    groups: dict[str, list[Observation]] = {}

    def put(label, obs):
        groups.setdefault(label, []).append(obs)

    if by == "time_of_day":
        periods = bounds or TIME_PERIODS
        labels = [f"{a:02d}-{b:02d}" for a, b in periods]
        for obs in dataset.observations:
            if obs.depart is None:
                raise ValueError(f"observation {obs.od} has no departure time")
            hour = (obs.depart % 86400.0) / 3600.0
            for (a, b), label in zip(periods, labels):
                inside = (a <= hour < b) if a < b else (hour >= a or hour < b)
                if inside:
                    put(label, obs)
                    break
        order = labels
    elif by == "distance":
        lo, hi = bounds or DISTANCE_BOUNDS
        order = [f"<{lo / 1000:g}km", f"{lo / 1000:g}-{hi / 1000:g}km", f">{hi / 1000:g}km"]
        for obs in dataset.observations:
            length = obs.chosen_length
            if length is None:
                raise ValueError(f"observation {obs.od} has no chosen-route length")
            if length < lo:
                put(order[0], obs)
            elif length <= hi:
                put(order[1], obs)
            else:
                put(order[2], obs)
    elif by == "occupancy":
        order = ["occupied", "unoccupied"]
        for obs in dataset.observations:
            if obs.occupied is None:
                raise ValueError(f"observation {obs.od} has no occupancy flag")
            put("occupied" if obs.occupied else "unoccupied", obs)
    else:
        raise ValueError(f"unknown stratification {by!r}")

    return [
        (label, Dataset(dataset.feature_names, groups[label], dataset.variant, dataset.units))
        for label in order
        if label in groups
    ]


# --- staged pipeline --------------------------------------------------------

@dataclass
class StageRecord:
    params: dict
    inputs: dict
    outputs: dict


def run_pipeline(config_path, threads: int = 1) -> dict:
    """Execute every stage in order; returns the manifest (also written to
    ``<workdir>/manifest.json``)."""
    cfg = load_config(config_path)
    workdir = Path(cfg["run"]["workdir"])
    if not workdir.is_absolute():
        workdir = Path(config_path).parent / workdir
    workdir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"config": sha256_file(config_path), "stages": {}}

    def record(stage, params, inputs, outputs):
        manifest["stages"][stage] = {
            "params": params,
            "inputs": {str(p.name): sha256_file(p) for p in inputs},
            "outputs": {str(p.name): sha256_file(p) for p in outputs},
        }

    def run_stage(stage, fn):
        try:
            return fn()
        except Exception as exc:
            raise PipelineError(stage, exc) from exc

    # world: synthesize or locate inputs
    if "world" in cfg:
        paths = run_stage("synth", lambda: _stage_synth(cfg, workdir, record))
    else:
        paths = {k: Path(config_path).parent / v for k, v in cfg["inputs"].items()}
        for k, p in paths.items():
            if not p.exists():
                raise PipelineError("inputs", FileNotFoundError(f"{k} file {p} missing"))

    net = run_stage("speeds", lambda: _stage_speeds(cfg, workdir, paths, record))
    grid = grid_from_config(cfg)
    dummies = run_stage("metrics", lambda: _stage_metrics(cfg, workdir, paths, net, grid, record))
    partition = run_stage("anchors", lambda: _stage_anchors(cfg, workdir, net, record))
    choice_sets = run_stage(
        "choiceset", lambda: _stage_choiceset(cfg, workdir, paths, net, threads, record)
    )
    dataset = run_stage(
        "features",
        lambda: _stage_features(cfg, workdir, net, grid, dummies, partition, choice_sets, record),
    )
    run_stage("fit", lambda: _stage_fit(cfg, workdir, dataset, record))

    manifest_path = workdir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def _stage_synth(cfg, workdir, record):
    w = cfg["world"]
    city = synth.make_grid_city(
        rows=int(w["rows"]),
        cols=int(w["cols"]),
        spacing=float(w.get("spacing", 500.0)),
        ring=bool(w.get("ring", True)),
        seed=int(w.get("seed", 0)),
    )
    trips = synth.make_trips(city, int(w.get("n_trips", 200)), seed=int(w.get("trip_seed", 1)))
    paths = {
        "network": workdir / "network.txt",
        "trips": workdir / "trips.txt",
        "buildings": workdir / "buildings.jsonl",
        "pois": workdir / "pois.jsonl",
    }
    # the synthesized network carries ground-truth speeds; the speeds stage
    # must re-estimate them from trips, so they are stripped here
    bare = RoadNetwork(
        city.net.nodes,
        {eid: netgraph.Edge(e.tail, e.head, e.length, None, e.geometry) for eid, e in city.net.edges.items()},
    )
    netgraph.save_network(bare, paths["network"])
    netgraph.save_trips(trips, paths["trips"])
    netgraph.save_buildings(city.buildings, paths["buildings"])
    netgraph.save_pois(city.pois, paths["pois"])
    record("synth", dict(w), [], list(paths.values()))
    return paths


def _stage_speeds(cfg, workdir, paths, record):
    net = netgraph.load_network(paths["network"])
    trips = netgraph.load_trips(paths["trips"], net)
    net = traffic.apply_speeds(net, trips)
    out = workdir / "speeds.tsv"
    write_speeds(out, net)
    record("speeds", {}, [paths["network"], paths["trips"]], [out])
    return net


def _stage_metrics(cfg, workdir, paths, net, grid, record):
    m = cfg["metrics"]
    params = SkyViewParams(
        n_sectors=int(m["sky_sectors"]),
        radius=float(m["sky_radius"]),
        floor_height=float(m["floor_height"]),
    )
    buildings = netgraph.load_buildings(paths["buildings"]) if paths.get("buildings") else []
    pois = netgraph.load_pois(paths["pois"]) if paths.get("pois") else []
    factors = complexity.compute_factors(net, grid, buildings, pois, params)
    meta = {
        "sky_sectors": params.n_sectors,
        "sky_radius": params.radius,
        "floor_height": params.floor_height,
        "hex_radius": grid.radius,
        "hex_origin": list(grid.origin),
        "factor_means": {name: factors.mean_of(name) for name in complexity.FACTOR_ORDER},
    }
    write_factor_tables(workdir, factors, meta)
    outputs = [workdir / "node_metrics.tsv", workdir / "cell_metrics.tsv", workdir / "metrics_meta.json"]
    inputs = [p for k, p in paths.items() if k in ("network", "buildings", "pois")]
    record("metrics", meta, inputs, outputs)
    return complexity.dummy_code(factors)


def _stage_anchors(cfg, workdir, net, record):
    a = cfg["anchors"]
    partition = louvain(net, resolution=float(a["resolution"]), seed=int(a["seed"]))
    report = cohesion_report(partition, net)
    write_partition(workdir, partition, report)
    outputs = [workdir / "node_anchors.tsv", workdir / "edge_anchors.tsv", workdir / "anchors_meta.json"]
    record("anchors", dict(a), [], outputs)
    return partition


def _build_one_set(args):
    net, od, group, ccfg = args
    observed = [Route.from_edges(t.edges, net) for t in group]
    try:
        return build_choice_set(
            net,
            od,
            observed,
            min_size=int(ccfg["min_size"]),
            threshold=float(ccfg["threshold"]),
            k_cap=int(ccfg["k_cap"]),
            weight=ccfg["weight"],
            chosen=0,
            depart=group[0].depart,
            occupied=group[0].occupied,
        )
    except UndersizedChoiceSetError:
        return None


def _stage_choiceset(cfg, workdir, paths, net, threads, record):
    tcfg = cfg["trips"]
    ccfg = cfg["choiceset"]
    trips = netgraph.load_trips(paths["trips"], net)
    trips = netgraph.filter_trips(
        trips,
        net,
        duration_bounds=tuple(tcfg["duration_bounds"]),
        length_bounds=tuple(tcfg["length_bounds"]),
    )
    groups: dict[tuple, list] = {}
    for t in trips:
        od = (net.edges[t.edges[0]].tail, net.edges[t.edges[-1]].head)
        if od[0] != od[1]:
            groups.setdefault(od, []).append(t)
    jobs = [(net, od, groups[od], ccfg) for od in sorted(groups)]
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_build_one_set, jobs))
    else:
        results = [_build_one_set(j) for j in jobs]
    choice_sets = [cs for cs in results if cs is not None]
    out = workdir / "choicesets.jsonl"
    write_choice_sets(out, choice_sets)
    params = dict(ccfg) | {"trip_filter": dict(tcfg), "n_sets": len(choice_sets)}
    record("choiceset", params, [paths["trips"]], [out])
    return choice_sets


def _stage_features(cfg, workdir, net, grid, dummies, partition, choice_sets, record):
    variant = ModelVariant(int(cfg["features"]["variant"]))
    dataset = build_dataset(
        choice_sets,
        dummies if variant.with_env else None,
        partition if variant.with_anchors else None,
        grid if variant.with_env else None,
        net,
        variant,
    )
    out = workdir / "features.tsv"
    write_features(out, dataset)
    record("features", {"variant": int(variant)}, [workdir / "choicesets.jsonl"], [out])
    return dataset


def _stage_fit(cfg, workdir, dataset, record):
    fcfg = cfg["fit"]
    spec = spec_for(dataset, fcfg["scale_mode"] or None)
    options = FitOptions(
        max_iter=int(fcfg["max_iter"]),
        use_multiplicity=bool(fcfg["use_multiplicity"]),
    )
    result = fit(dataset, spec, options)
    out_json = workdir / "fit.json"
    with open(out_json, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    out_txt = workdir / "fit.txt"
    with open(out_txt, "w", encoding="utf-8") as fh:
        fh.write(result.coefficient_table() + "\n")
    record(
        "fit",
        {"scale_mode": spec.scale_mode, "max_iter": options.max_iter},
        [workdir / "features.tsv"],
        [out_json, out_txt],
    )
    return result


def stratified_fit(dataset: Dataset, by: str, options: FitOptions | None = None, scale_mode=None):
    """Fit each stratum independently; returns [(label, FitResult)]."""
    out = []
    for label, sub in stratify(dataset, by):
        spec = spec_for(sub, scale_mode)
        out.append((label, fit(sub, spec, options)))
    return out
