"""Batch command-line access to the engine for scripting and reproduction.

Subcommands: ingest, zones, rank, matrix, transfers, search, resolve, serve.
All outputs are deterministic given (dataset, flags, seed); `search` requires
an explicit seed for that reason.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .analytics import (
    compute_zones,
    detect_transfers,
    flow_matrix,
    rank_routes,
    rank_to_csv,
    zone_statistics,
)
from .criteria import CostParams, CriterionVector, load_cost_params
from .graph import GraphParams, build_anchored_graph
from .network import build_demand_matrix, ingest_network
from .parsing import parse_anchors, parse_bounds, parse_ranges, parse_weights, parse_window
from .resolution import create_resolution_session, resolve as resolve_step
from .search import SearchParams, create_session, route_id as route_digest, step


def _add_dataset_args(parser: argparse.ArgumentParser):
    parser.add_argument("--dataset", help="directory holding stops.csv/routes.csv/trips.csv")
    parser.add_argument("--stops", help="stops.csv path (overrides --dataset)")
    parser.add_argument("--routes", help="routes.csv path")
    parser.add_argument("--trips", help="trips.csv path")
    parser.add_argument("--road-distances", help="optional road_distances.csv path")
    parser.add_argument("--out", help="output path (default: stdout)")


def _load_network(args):
    if args.stops or args.routes or args.trips:
        if not (args.stops and args.routes and args.trips):
            raise ValueError("--stops, --routes, and --trips must be given together")
        stops, routes, trips = args.stops, args.routes, args.trips
        road = args.road_distances
    elif args.dataset:
        root = Path(args.dataset)
        stops, routes, trips = root / "stops.csv", root / "routes.csv", root / "trips.csv"
        road = root / "road_distances.csv"
        road = road if road.exists() else None
    else:
        raise ValueError("give --dataset DIR or explicit --stops/--routes/--trips")
    return ingest_network(stops, routes, trips, road)


def _write(args, text: str):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_text(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _cost(args) -> CostParams:
    if getattr(args, "cost_config", None):
        return load_cost_params(args.cost_config)
    return CostParams()


def _window(args, network):
    if getattr(args, "window", None):
        return parse_window(args.window)
    return network.full_window()


# -- subcommand implementations ----------------------------------------------


def cmd_ingest(args) -> int:
    network = _load_network(args)
    canonical = network.canonical_json()
    payload = {
        "stops": len(network.stops),
        "routes": len(network.routes),
        "trips": len(network.trips),
        "report": network.report.as_dict(),
        "checksum": "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
    }
    _write(args, _json_text(payload))
    return 0


def cmd_zones(args) -> int:
    network = _load_network(args)
    partition = compute_zones(network, args.count)
    stats = zone_statistics(partition, network, _window(args, network), _cost(args))
    _write(args, _json_text(partition.to_geojson(stats)))
    return 0


def cmd_rank(args) -> int:
    network = _load_network(args)
    rows = rank_routes(
        network,
        parse_weights(args.weights),
        parse_bounds(args.filter) if args.filter else None,
        _window(args, network),
        _cost(args),
    )
    _write(args, rank_to_csv(rows))
    return 0


def cmd_matrix(args) -> int:
    network = _load_network(args)
    matrix = flow_matrix(network, args.route, _window(args, network), args.threshold)
    _write(args, _json_text(matrix.to_dict(args.bin)))
    return 0


def cmd_transfers(args) -> int:
    network = _load_network(args)
    links = detect_transfers(network, args.max_walk, args.max_wait)
    _write(args, _json_text([link.as_dict() for link in links]))
    return 0


def cmd_search(args) -> int:
    network = _load_network(args)
    if args.anchors:
        stop_sets = parse_anchors(args.anchors)
    elif args.route:
        stops = network.routes[args.route].stops
        stop_sets = [[stops[0]], [stops[-1]]]
    elif args.origin and args.destination:
        stop_sets = [[args.origin], [args.destination]]
    else:
        raise ValueError("give --route, --anchors, or --origin and --destination")

    gp = GraphParams(args.min_spacing, args.max_spacing, args.slack)
    window = _window(args, network)
    demand = build_demand_matrix(network, window, args.catchment_radius)
    graph = build_anchored_graph(network, stop_sets, gp)
    cost = _cost(args)
    session = create_session(
        graph,
        demand,
        cost,
        SearchParams(k=args.parallel),
        ranges=parse_ranges(args.ranges) if args.ranges else None,
        seed=args.seed,
    )
    session.resume()
    snapshot = step(session, args.iterations)
    payload = snapshot.to_wire()
    payload.update(
        {
            "origin": graph.origin,
            "destination": graph.destination,
            "anchors": [list(group) for group in graph.stop_sets],
            "stop_order": list(graph.nodes),
            "seed": args.seed,
            "parallel": args.parallel,
            "iterations_requested": args.iterations,
        }
    )
    _write(args, _json_text(payload))
    return 0


def cmd_resolve(args) -> int:
    data = json.loads(Path(args.input).read_text(encoding="utf-8"))
    routes = [tuple(r["stops"]) for r in data["routes"]]
    values = {tuple(r["stops"]): CriterionVector.from_dict(r["criteria"]) for r in data["routes"]}
    weights = parse_weights(args.weights) if args.weights else None
    session = create_resolution_session(routes, values, data["stop_order"], weights, args.beta)

    steps = []
    choices = [int(c) for c in args.choose.split(",") if c.strip()] if args.choose else []
    for pick in choices:
        if session.is_final:
            raise ValueError("resolution already final; too many --choose entries")
        active = session.conflicts[session.active_index]
        if not (0 <= pick < len(active.alternatives)):
            raise ValueError(f"choice {pick} out of range for the active conflict")
        cluster_index = active.alternatives[pick][0]
        chosen = session.clusters[cluster_index]
        steps.append(
            {
                "conflict": list(active.position),
                "picked_pattern": chosen.pattern_text,
                "candidates_before": len(session.candidates),
            }
        )
        resolve_step(session, session.active_index, cluster_index)

    payload = {"steps": steps, "state": session.to_dict()}
    if session.is_final:
        route = session.final_route
        payload["final_route"] = {
            "id": route_digest(route),
            "stops": list(route),
            "criteria": session.values[route].as_dict(),
        }
    _write(args, _json_text(payload))
    return 0


def cmd_serve(args) -> int:
    from .api import ServiceConfig, serve

    config = ServiceConfig(
        host=args.host,
        port=args.port,
        dataset_dir=args.dataset,
        cost=_cost(args),
        graph_params=GraphParams(args.min_spacing, args.max_spacing, args.slack),
        max_sessions=args.max_sessions,
        snapshot_interval=args.snapshot_interval,
    )
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="busnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and print a snapshot summary")
    _add_dataset_args(p)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("zones", help="compute transportation zones as GeoJSON")
    _add_dataset_args(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--window", help="start..end ISO-8601")
    p.add_argument("--cost-config")
    p.set_defaults(fn=cmd_zones)

    p = sub.add_parser("rank", help="rank routes by weighted criteria into rank.csv")
    _add_dataset_args(p)
    p.add_argument("--weights", required=True, help="e.g. passenger_flow=1,service_cost=0.5")
    p.add_argument("--filter", help="e.g. passenger_flow=10000..,route_length=..35")
    p.add_argument("--window")
    p.add_argument("--cost-config")
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("matrix", help="passenger flow matrix of one route as JSON")
    _add_dataset_args(p)
    p.add_argument("--route", required=True)
    p.add_argument("--bin", choices=["hourly", "weekday"], default="hourly")
    p.add_argument("--threshold", type=float, default=100.0)
    p.add_argument("--window")
    p.set_defaults(fn=cmd_matrix)

    p = sub.add_parser("transfers", help="detect same-card transfers as JSON")
    _add_dataset_args(p)
    p.add_argument("--max-walk", type=float, default=500.0, help="metres")
    p.add_argument("--max-wait", type=float, default=30.0, help="minutes")
    p.set_defaults(fn=cmd_transfers)

    p = sub.add_parser("search", help="run the Pareto route search to a JSON result")
    _add_dataset_args(p)
    p.add_argument("--route", help="replan this route (origin/destination from its endpoints)")
    p.add_argument("--origin")
    p.add_argument("--destination")
    p.add_argument("--anchors", help="anchored stop sets, e.g. 'a;b,c;d'")
    p.add_argument("--ranges", help="criterion ranges, e.g. service_time=..2.5")
    p.add_argument("--iterations", type=int, required=True)
    p.add_argument("--seed", type=int, required=True, help="mandatory: the search is stochastic")
    p.add_argument("--parallel", type=int, default=1, help="expansion width k")
    p.add_argument("--min-spacing", type=float, default=GraphParams().min_spacing_km)
    p.add_argument("--max-spacing", type=float, default=GraphParams().max_spacing_km)
    p.add_argument("--slack", type=float, default=GraphParams().progress_slack)
    p.add_argument("--catchment-radius", type=float, default=0.0, help="demand catchment metres")
    p.add_argument("--window")
    p.add_argument("--cost-config")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("resolve", help="replay a conflict-resolution script on a search result")
    p.add_argument("--input", required=True, help="pareto JSON from `search`")
    p.add_argument("--beta", type=int, default=4)
    p.add_argument("--weights")
    p.add_argument("--choose", help="comma-separated alternative indices, applied in order")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_resolve)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--dataset", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--snapshot-interval", type=int, default=25)
    p.add_argument("--max-sessions", type=int, default=8)
    p.add_argument("--min-spacing", type=float, default=GraphParams().min_spacing_km)
    p.add_argument("--max-spacing", type=float, default=GraphParams().max_spacing_km)
    p.add_argument("--slack", type=float, default=GraphParams().progress_slack)
    p.add_argument("--cost-config")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary: map to a machine-parsable line
        code = type(exc).__name__
        sys.stderr.write(json.dumps({"error": code, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
