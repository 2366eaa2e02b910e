"""Command-line interface: one subcommand per pipeline stage plus the
end-to-end runner. All outputs are UTF-8 text; see the README for file
schemas."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import complexity, netgraph, pipeline, synth, traffic
from .anchors import cohesion_report, louvain
from .choiceset import Route
from .cnpsl import FitOptions, spec_for
from .cnpsl import fit as fit_model
from .complexity import SkyViewParams
from .features import ModelVariant
from .hexgrid import HexGrid


@click.group()
def main():
    """Route-choice estimation toolkit for road networks."""


def _grid_options(fn):
    fn = click.option("--hex-radius", type=float, default=500.0, show_default=True)(fn)
    fn = click.option("--hex-origin", type=(float, float), default=(0.0, 0.0), show_default=True)(fn)
    return fn


def _load_net(network, speeds=None):
    net = netgraph.load_network(network)
    if speeds:
        net = net.with_speeds(pipeline.read_speeds(speeds))
    return net


@main.command("synth")
@click.option("--rows", type=int, default=6, show_default=True)
@click.option("--cols", type=int, default=6, show_default=True)
@click.option("--spacing", type=float, default=500.0, show_default=True)
@click.option("--ring/--no-ring", default=True, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-trips", type=int, default=200, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("."), show_default=True)
def synth_cmd(rows, cols, spacing, ring, seed, n_trips, out):
    """Generate a synthetic city: network, trips, buildings, POIs."""
    out.mkdir(parents=True, exist_ok=True)
    city = synth.make_grid_city(rows, cols, spacing=spacing, ring=ring, seed=seed)
    trips = synth.make_trips(city, n_trips, seed=seed + 1)
    netgraph.save_network(city.net, out / "network.txt")
    netgraph.save_trips(trips, out / "trips.txt")
    netgraph.save_buildings(city.buildings, out / "buildings.jsonl")
    netgraph.save_pois(city.pois, out / "pois.jsonl")
    truth = {
        "rows": rows,
        "cols": cols,
        "spacing": spacing,
        "ring": ring,
        "seed": seed,
        "n_trips": len(trips),
        "edge_speeds": {str(e): city.net.edges[e].speed for e in sorted(city.net.edges)},
    }
    with open(out / "ground_truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=1, sort_keys=True)
        fh.write("\n")
    click.echo(f"wrote synthetic world to {out}")


@main.command("speeds")
@click.option("--network", required=True, type=click.Path(exists=True))
@click.option("--trips", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(path_type=Path), default=Path("speeds.tsv"), show_default=True)
def speeds_cmd(network, trips, out):
    """Estimate per-edge speeds from trip speed samples."""
    net = netgraph.load_network(network)
    net = traffic.apply_speeds(net, netgraph.load_trips(trips, net))
    pipeline.write_speeds(out, net)
    click.echo(f"wrote {out}")


@main.command("metrics")
@click.option("--network", required=True, type=click.Path(exists=True))
@click.option("--buildings", type=click.Path(exists=True))
@click.option("--pois", type=click.Path(exists=True))
@_grid_options
@click.option("--sky-sectors", type=int, default=16, show_default=True)
@click.option("--sky-radius", type=float, default=100.0, show_default=True)
@click.option("--floor-height", type=float, default=3.0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("."), show_default=True)
def metrics_cmd(network, buildings, pois, hex_radius, hex_origin, sky_sectors, sky_radius, floor_height, out):
    """Compute all complexity factors at node and hexagon scale."""
    out.mkdir(parents=True, exist_ok=True)
    net = _load_net(network)
    grid = HexGrid(radius=hex_radius, origin=hex_origin)
    params = SkyViewParams(sky_sectors, sky_radius, floor_height)
    blds = netgraph.load_buildings(buildings) if buildings else []
    ps = netgraph.load_pois(pois) if pois else []
    factors = complexity.compute_factors(net, grid, blds, ps, params)
    meta = {
        "sky_sectors": sky_sectors,
        "sky_radius": sky_radius,
        "floor_height": floor_height,
        "hex_radius": hex_radius,
        "hex_origin": list(hex_origin),
        "factor_means": {n: factors.mean_of(n) for n in complexity.FACTOR_ORDER},
    }
    pipeline.write_factor_tables(out, factors, meta)
    click.echo(f"wrote metrics tables to {out}")


@main.command("anchors")
@click.option("--network", required=True, type=click.Path(exists=True))
@click.option("--resolution", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("."), show_default=True)
def anchors_cmd(network, resolution, seed, out):
    """Extract anchor regions by community detection."""
    out.mkdir(parents=True, exist_ok=True)
    net = _load_net(network)
    partition = louvain(net, resolution=resolution, seed=seed)
    report = cohesion_report(partition, net)
    pipeline.write_partition(out, partition, report)
    click.echo(
        f"{partition.n_anchors} anchors, modularity {partition.modularity:.4f}; wrote {out}"
    )


@main.command("choiceset")
@click.option("--network", required=True, type=click.Path(exists=True))
@click.option("--speeds", required=True, type=click.Path(exists=True))
@click.option("--trips", required=True, type=click.Path(exists=True))
@click.option("--min-size", type=int, default=5, show_default=True)
@click.option("--threshold", type=float, default=0.4, show_default=True)
@click.option("--k-cap", type=int, default=50, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("choicesets.jsonl"), show_default=True)
def choiceset_cmd(network, speeds, trips, min_size, threshold, k_cap, out):
    """Build per-OD choice sets from observed trips plus supplements."""
    net = _load_net(network, speeds)
    all_trips = netgraph.load_trips(trips, net)
    groups: dict[tuple, list] = {}
    for t in all_trips:
        od = (net.edges[t.edges[0]].tail, net.edges[t.edges[-1]].head)
        if od[0] != od[1]:
            groups.setdefault(od, []).append(t)
    cfg = {"min_size": min_size, "threshold": threshold, "k_cap": k_cap, "weight": "duration"}
    sets = []
    for od in sorted(groups):
        cs = pipeline._build_one_set((net, od, groups[od], cfg))
        if cs is not None:
            sets.append(cs)
    pipeline.write_choice_sets(out, sets)
    click.echo(f"wrote {len(sets)} choice sets to {out}")


@main.command("features")
@click.option("--network", required=True, type=click.Path(exists=True))
@click.option("--speeds", required=True, type=click.Path(exists=True))
@click.option("--choicesets", required=True, type=click.Path(exists=True))
@click.option("--metrics-dir", type=click.Path(exists=True, path_type=Path))
@click.option("--anchors-dir", type=click.Path(exists=True, path_type=Path))
@_grid_options
@click.option("--variant", type=int, default=4, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("features.tsv"), show_default=True)
def features_cmd(network, speeds, choicesets, metrics_dir, anchors_dir, hex_radius, hex_origin, variant, out):
    """Assemble per-route feature vectors for one model variant."""
    from .features import build_dataset

    net = _load_net(network, speeds)
    variant = ModelVariant(variant)
    sets = pipeline.read_choice_sets(choicesets, net)
    dummies = None
    grid = None
    if variant.with_env:
        if metrics_dir is None:
            raise click.UsageError("--metrics-dir required for variants 2 and 4")
        dummies = complexity.dummy_code(pipeline.read_factor_tables(metrics_dir))
        grid = HexGrid(radius=hex_radius, origin=hex_origin)
    partition = None
    if variant.with_anchors:
        if anchors_dir is None:
            raise click.UsageError("--anchors-dir required for variants 3 and 4")
        partition = pipeline.read_partition(anchors_dir)
    dataset = build_dataset(sets, dummies, partition, grid, net, variant)
    pipeline.write_features(out, dataset)
    click.echo(f"wrote {dataset.n_obs} observations to {out}")


@main.command("fit")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--scale-mode", type=click.Choice(["fixed", "shared", "per_nest"]), default=None)
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.option("--use-multiplicity", is_flag=True, default=False)
@click.option("--out", type=click.Path(path_type=Path), default=Path("fit.json"), show_default=True)
def fit_cmd(features_path, scale_mode, max_iter, use_multiplicity, out):
    """Maximum-likelihood estimation on an assembled feature table."""
    dataset = pipeline.read_features(features_path)
    spec = spec_for(dataset, scale_mode)
    result = fit_model(dataset, spec, FitOptions(max_iter=max_iter, use_multiplicity=use_multiplicity))
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    click.echo(result.coefficient_table())


@main.command("stratify-fit")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--by", type=click.Choice(["time_of_day", "distance", "occupancy"]), required=True)
@click.option("--scale-mode", type=click.Choice(["fixed", "shared", "per_nest"]), default=None)
@click.option("--out", type=click.Path(path_type=Path), default=Path("strata.json"), show_default=True)
def stratify_fit_cmd(features_path, by, scale_mode, out):
    """Fit the model independently on each stratum of the observations."""
    dataset = pipeline.read_features(features_path)
    if by == "distance":
        _attach_chosen_lengths(dataset)
    results = pipeline.stratified_fit(dataset, by, scale_mode=scale_mode)
    payload = {label: res.to_dict() for label, res in results}
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for label, res in results:
        click.echo(f"--- stratum {label} ({res.n_obs} observations)")
        click.echo(res.coefficient_table())


def _attach_chosen_lengths(dataset):
    # length_km is the first feature column; recover meters for strata bounds
    idx = dataset.feature_names.index("length_km")
    for obs in dataset.observations:
        obs.chosen_length = float(obs.x[obs.chosen, idx]) * 1000.0


@main.command("vif")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(path_type=Path), default=Path("vif.json"), show_default=True)
def vif_cmd(features_path, out):
    """Collinearity diagnostics over the feature columns."""
    dataset = pipeline.read_features(features_path)
    names = dataset.feature_names + ["ln_path_size"]
    rows = []
    for obs in dataset.observations:
        rows.append(np.column_stack([obs.x, obs.ln_ps[:, None]]))
    design = np.concatenate(rows, axis=0)
    keep = [i for i in range(design.shape[1]) if np.ptp(design[:, i]) > 0]
    dropped = [names[i] for i in range(design.shape[1]) if i not in keep]
    design = design[:, keep]
    names = [names[i] for i in keep]
    vifs = complexity.vif(design)
    corr = complexity.correlation_matrix(design)
    payload = {
        "factors": names,
        "vif": [float(v) if np.isfinite(v) else "inf" for v in vifs],
        "correlation": [[float(c) for c in row] for row in corr],
        "dropped_constant": dropped,
    }
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    width = max(len(n) for n in names)
    for n, v in zip(names, vifs):
        click.echo(f"{n:<{width}}  VIF {v:8.3f}" if np.isfinite(v) else f"{n:<{width}}  VIF      inf")


@main.command("pipeline")
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--threads", type=int, default=1, show_default=True)
def pipeline_cmd(config, threads):
    """Run every stage from a TOML config and write a manifest."""
    try:
        manifest = pipeline.run_pipeline(config, threads=threads)
    except pipeline.PipelineError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    click.echo(f"pipeline complete; {len(manifest['stages'])} stages in manifest")


if __name__ == "__main__":
    main()
