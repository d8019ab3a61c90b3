"""Command-line pipeline with file-based handoffs between stages.

Stages write their artifacts into the output directory and later stages
read them back, so any single stage can be rerun or replaced (e.g. a
hand-written rebalancing plan). Exit codes: 0 success, 2 input error,
3 planning infeasibility, 4 warnings promoted by --strict.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analytics import (
    compute_density,
    congested_edges,
    congestion_diff,
    export_heatmap,
    save_congestion_diff,
    save_densities,
    save_histogram,
    save_share_table,
    share_table,
    stacked_histogram,
)
from .config import ScenarioConfig, load_config_file, make_config
from .demand import load_trips
from .errors import ModfleetError, NotEnoughPoints
from .network import PathCache, load_network
from .rebalancing import build_forecast, load_rebalancing_plan, plan_rebalancing, save_rebalancing_plan
from .simulation import (
    SimulationResult,
    TripType,
    TYPE_ORDER,
    load_occupancy,
    load_summary,
    run_conventional,
    run_mod,
    save_events,
    save_occupancy,
    save_summary,
)
from .sizing import size_fleet
from .stations import (
    build_station_plan,
    load_station_plan,
    mean_pickup_time,
    plan_stations,
    save_station_plan,
)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INFEASIBLE = 3
EXIT_STRICT = 4

_OVERRIDE_KEYS = [
    "nodes_path", "edges_path", "trips_path", "out_dir", "n_stations", "seed",
    "default_speed_kmh", "slice_s", "window_s", "y_c", "low_cut", "focus",
    "cap", "lookahead_slices", "pickup_bound_s", "cluster_on",
    "histogram_bins", "jobs",
]


def _add_common_options(sub):
    sub.add_argument("--config", help="flat JSON config file")
    sub.add_argument("--nodes", dest="nodes_path", help="nodes.csv path")
    sub.add_argument("--edges", dest="edges_path", help="edges.csv path")
    sub.add_argument("--trips", dest="trips_path", help="trips.csv path")
    sub.add_argument("--out", dest="out_dir", help="output directory")
    sub.add_argument("--n-stations", dest="n_stations", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--speed-kmh", dest="default_speed_kmh", type=float)
    sub.add_argument("--yc", dest="y_c", type=float, help="critical density (veh/m/lane)")
    sub.add_argument("--window-s", dest="window_s", type=float)
    sub.add_argument("--slice-s", dest="slice_s", type=float)
    sub.add_argument("--bins", dest="histogram_bins", type=int)
    sub.add_argument("--jobs", type=int, help="internal worker cap (never affects outputs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modfleet",
        description="Station-based mobility-on-demand simulation and congestion analytics.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("plan", help="place stations and check the pickup-time bound")
    _add_common_options(p)
    p.set_defaults(handler=cmd_plan)

    p = subs.add_parser("size-fleet", help="size per-station vehicle counts to a fixed point")
    _add_common_options(p)
    p.add_argument("--strict", action="store_true",
                   help="exit 4 when sizing does not converge")
    p.set_defaults(handler=cmd_size_fleet)

    p = subs.add_parser("rebalance", help="compute the per-slice rebalancing plan")
    _add_common_options(p)
    p.set_defaults(handler=cmd_rebalance)

    p = subs.add_parser("simulate", help="run one scenario and write the occupancy log")
    _add_common_options(p)
    p.add_argument("--mode", choices=("conventional", "mod"), required=True)
    p.add_argument("--auto", action="store_true",
                   help="create missing planning artifacts inline (mod mode)")
    p.add_argument("--events", action="store_true", help="write the event trace")
    p.set_defaults(handler=cmd_simulate)

    p = subs.add_parser("analyze", help="densities, shares, histograms, heatmap")
    _add_common_options(p)
    p.add_argument("--occupancy", help="occupancy log (default: OUT/mod/occupancy.csv)")
    p.add_argument("--summary", help="summary.json next to the log by default")
    p.add_argument("--baseline", help="conventional occupancy log for the congestion diff")
    p.add_argument("--windows", help="window range START:STOP (half-open)")
    p.set_defaults(handler=cmd_analyze)

    p = subs.add_parser("compare", help="congestion diff between two occupancy logs")
    _add_common_options(p)
    p.add_argument("--baseline", required=True, help="conventional occupancy log")
    p.add_argument("--mod", required=True, help="MoD occupancy log")
    p.set_defaults(handler=cmd_compare)
    return parser


def _config_from_args(args) -> ScenarioConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
    return make_config(file_values, overrides)


def _require(cfg: ScenarioConfig, *names):
    for name in names:
        if getattr(cfg, f"{name}_path") is None:
            raise ValueError(f"missing input: provide --{name} or config key {name}_path")


def _load_network_and_trips(cfg: ScenarioConfig):
    _require(cfg, "nodes", "edges", "trips")
    net = load_network(cfg.nodes_path, cfg.edges_path, cfg.default_speed_kmh)
    demand = load_trips(cfg.trips_path, net)
    return net, demand


def _out(cfg: ScenarioConfig, *parts) -> Path:
    path = Path(cfg.out_dir).joinpath(*parts)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_plan(cfg: ScenarioConfig, args) -> int:
    net, demand = _load_network_and_trips(cfg)
    stations = plan_stations(demand, net, cfg.n_stations, cfg.seed, cfg.cluster_on)
    plan = build_station_plan(net, stations, jobs=cfg.jobs)
    save_station_plan(plan, _out(cfg, "stations.json"))
    mpt = mean_pickup_time(stations, demand, net)
    verdict = "PASS" if mpt <= cfg.pickup_bound_s else "FAIL"
    print(f"stations: {len(stations)} -> {_out(cfg, 'stations.json')}")
    print(f"mean pickup time: {mpt:.1f} s ({verdict}, bound {cfg.pickup_bound_s:.0f} s)")
    return EXIT_OK


def cmd_size_fleet(cfg: ScenarioConfig, args) -> int:
    net, demand = _load_network_and_trips(cfg)
    stations_file = _out(cfg, "stations.json")
    if not stations_file.exists():
        raise FileNotFoundError(f"{stations_file} not found; run `modfleet plan` first")
    plan = load_station_plan(stations_file, net, jobs=cfg.jobs)
    sizing = size_fleet(plan, demand, net, slice_s=cfg.slice_s,
                        lookahead_slices=cfg.lookahead_slices, window_s=cfg.window_s)
    save_station_plan(sizing.plan, stations_file)
    print(f"fleet size: {sizing.fleet_size} vehicles "
          f"({sizing.iterations} iteration(s), converged={sizing.converged})")
    if not sizing.converged:
        print("warning: sizing did not converge; kept the last iterate", file=sys.stderr)
        if args.strict:
            return EXIT_STRICT
    return EXIT_OK


def cmd_rebalance(cfg: ScenarioConfig, args) -> int:
    net, demand = _load_network_and_trips(cfg)
    stations_file = _out(cfg, "stations.json")
    if not stations_file.exists():
        raise FileNotFoundError(f"{stations_file} not found; run `modfleet plan` first")
    plan = load_station_plan(stations_file, net, jobs=cfg.jobs)
    forecasts = build_forecast(demand, plan, net, cfg.slice_s)
    rebalancing = plan_rebalancing(forecasts, plan.initial_counts,
                                   plan.station_cost_matrix(), cfg.slice_s,
                                   cfg.lookahead_slices)
    save_rebalancing_plan(rebalancing, _out(cfg, "rebalancing.csv"))
    print(f"rebalancing orders: {len(rebalancing)} "
          f"({rebalancing.total_moves()} vehicle moves) -> {_out(cfg, 'rebalancing.csv')}")
    return EXIT_OK


def _write_simulation(cfg: ScenarioConfig, mode: str, result: SimulationResult,
                      events: bool) -> None:
    save_occupancy(result.log, _out(cfg, mode, "occupancy.csv"))
    save_summary(result, _out(cfg, mode, "summary.json"))
    if events:
        save_events(result, _out(cfg, mode, "events.csv"))
    total_km = sum(result.distance_by_type.values()) / 1000.0
    print(f"{mode}: served {result.served}, unsatisfied {result.unsatisfied}, "
          f"{total_km:.1f} km driven -> {_out(cfg, mode)}")


def cmd_simulate(cfg: ScenarioConfig, args) -> int:
    net, demand = _load_network_and_trips(cfg)
    if args.mode == "conventional":
        result = run_conventional(demand, net, cfg.window_s, trace=args.events)
        _write_simulation(cfg, "conventional", result, args.events)
        return EXIT_OK

    stations_file = _out(cfg, "stations.json")
    rebalancing_file = _out(cfg, "rebalancing.csv")
    if not args.auto and (not stations_file.exists() or not rebalancing_file.exists()):
        raise FileNotFoundError(
            "mod mode needs stations.json and rebalancing.csv in the output "
            "directory; run the planning stages or pass --auto")
    cache = PathCache(net)
    if not stations_file.exists():
        stations = plan_stations(demand, net, cfg.n_stations, cfg.seed, cfg.cluster_on)
        plan = build_station_plan(net, stations, jobs=cfg.jobs)
        sizing = size_fleet(plan, demand, net, slice_s=cfg.slice_s,
                            lookahead_slices=cfg.lookahead_slices,
                            window_s=cfg.window_s, cache=cache)
        plan = sizing.plan
        save_station_plan(plan, stations_file)
        save_rebalancing_plan(sizing.rebalancing, rebalancing_file)
    else:
        plan = load_station_plan(stations_file, net, jobs=cfg.jobs)
    if not rebalancing_file.exists():
        forecasts = build_forecast(demand, plan, net, cfg.slice_s, cache)
        rebalancing = plan_rebalancing(forecasts, plan.initial_counts,
                                       plan.station_cost_matrix(), cfg.slice_s,
                                       cfg.lookahead_slices)
        save_rebalancing_plan(rebalancing, rebalancing_file)
    else:
        rebalancing = load_rebalancing_plan(rebalancing_file)
    result = run_mod(demand, net, plan, rebalancing, backstop=False,
                     window_s=cfg.window_s, slice_s=cfg.slice_s, cache=cache,
                     trace=args.events)
    _write_simulation(cfg, "mod", result, args.events)
    return EXIT_OK


def _result_from_files(log, summary: dict) -> SimulationResult:
    distances = {t: float(summary["distances_m"].get(t.value, 0.0)) for t in TYPE_ORDER}
    return SimulationResult(
        log=log, distance_by_type=distances, served=int(summary.get("served", 0)),
        unsatisfied=int(summary.get("unsatisfied", 0)), per_station_min_inventory={},
        fleet_size=int(summary.get("fleet_size", 0)),
        phantoms_created=int(summary.get("phantoms_created", 0)),
        rebalancing_shortfall=int(summary.get("rebalancing_shortfall", 0)),
        served_trips=(),
    )


def _parse_window_range(spec: str) -> tuple[int, int]:
    try:
        start, stop = spec.split(":")
        return int(start), int(stop)
    except ValueError:
        raise ValueError(f"--windows expects START:STOP, got {spec!r}") from None


def cmd_analyze(cfg: ScenarioConfig, args) -> int:
    _require(cfg, "nodes", "edges")
    net = load_network(cfg.nodes_path, cfg.edges_path, cfg.default_speed_kmh)
    occupancy = Path(args.occupancy) if args.occupancy else _out(cfg, "mod", "occupancy.csv")
    summary_path = Path(args.summary) if args.summary else occupancy.parent / "summary.json"
    if not occupancy.exists():
        raise FileNotFoundError(f"occupancy log not found: {occupancy}")
    log = load_occupancy(occupancy, cfg.window_s)
    table = compute_density(log, net)
    if args.windows:
        table = table.restrict(*_parse_window_range(args.windows))
    cdc = cfg.critical_density()

    result = _result_from_files(log, load_summary(summary_path))
    shares = share_table(result, table, cdc, fleet_size=result.fleet_size or None)
    hist = stacked_histogram(table, cdc, cfg.histogram_bins)

    save_densities(table, _out(cfg, "analysis", "densities.csv"))
    save_share_table(shares, _out(cfg, "analysis", "share_table.json"))
    save_histogram(hist, _out(cfg, "analysis", "histogram.csv"))
    export_heatmap(table, net, _out(cfg, "analysis", "heatmap.geojson"))
    print(f"densities: {len(table.rows)} edge-windows, "
          f"histogram population {hist.population} "
          f"(excluded fraction {hist.excluded_fraction:.3f})")
    for t in TYPE_ORDER:
        row = shares.rows[t]
        print(f"  {t.value:<12} distance {row.distance_share:6.1%}   "
              f"congestion {row.congestion_share:6.1%}")

    if args.baseline:
        base_log = load_occupancy(args.baseline, cfg.window_s)
        base_table = compute_density(base_log, net)
        if args.windows:
            base_table = base_table.restrict(*_parse_window_range(args.windows))
        diff = congestion_diff(base_table, table, cdc)
        save_congestion_diff(diff, _out(cfg, "analysis", "congestion_diff.csv"))
        print(f"newly congested edge-windows: {len(diff.newly_congested)}")
    return EXIT_OK


def cmd_compare(cfg: ScenarioConfig, args) -> int:
    _require(cfg, "nodes", "edges")
    net = load_network(cfg.nodes_path, cfg.edges_path, cfg.default_speed_kmh)
    cdc = cfg.critical_density()
    base = compute_density(load_occupancy(args.baseline, cfg.window_s), net)
    mod = compute_density(load_occupancy(args.mod, cfg.window_s), net)
    diff = congestion_diff(base, mod, cdc)
    save_congestion_diff(diff, _out(cfg, "analysis", "congestion_diff.csv"))
    n_base = len(congested_edges(base, cdc, scope=(TripType.DEMAND,)))
    n_mod = len(congested_edges(mod, cdc))
    print(f"congested edge-windows: baseline {n_base}, mod {n_mod}, "
          f"newly congested {len(diff.newly_congested)}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return args.handler(cfg, args)
    except NotEnoughPoints as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ModfleetError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
