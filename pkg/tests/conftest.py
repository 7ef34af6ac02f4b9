"""Shared fixtures: tiny CSV corpora, toy graphs, and enumeration oracles."""

from __future__ import annotations

import io
import math
import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from busnet.network import BusNetwork, BusRoute, DemandMatrix, Stop, TripRecord

UTC = timezone.utc
T0 = datetime(2013, 4, 1, 8, 0, tzinfo=UTC)


def csv_io(text: str) -> io.StringIO:
    return io.StringIO(text.strip() + "\n")


def make_network(stops, routes, trips=(), road=None) -> BusNetwork:
    """Build a BusNetwork directly from python literals (bypasses CSV)."""
    stop_map = {s[0]: Stop(s[0], s[1] if len(s) > 2 else s[0], s[-2], s[-1]) for s in stops}
    route_map = {r[0]: BusRoute(r[0], tuple(r[1])) for r in routes}
    return BusNetwork(stop_map, route_map, list(trips), dict(road or {}))


def trip(card, minutes, route, board, alight, off_minutes=None) -> TripRecord:
    on = T0 + timedelta(minutes=minutes)
    off = T0 + timedelta(minutes=off_minutes if off_minutes is not None else minutes + 10)
    return TripRecord(card, on, route, board, alight, off)


def demand_from_pairs(pairs: dict, window=None) -> DemandMatrix:
    window = window or (T0, T0 + timedelta(hours=24))
    return DemandMatrix(window, dict(pairs))


# --- toy geometries -------------------------------------------------------
# Coordinates are placed near (40N, 116E); roads get explicit overrides so
# edge distances in fixtures are exact round numbers.


@pytest.fixture
def chain3_network():
    """o - a - d collinear, 1 km road hops, o->d direct road 2 km."""
    stops = [("o", 40.0, 116.0), ("a", 40.0, 116.01), ("d", 40.0, 116.02)]
    road = {
        ("o", "a"): 1.0,
        ("a", "d"): 1.0,
        ("o", "d"): 2.0,
    }
    return make_network(stops, [("r1", ["o", "a", "d"])], road=road)


@pytest.fixture
def diamond_network():
    """Pure diamond o -> {a, b} -> d: the direct o-d road is too long for an edge."""
    stops = [
        ("o", 40.0, 116.0),
        ("a", 40.004, 116.01),
        ("b", 39.996, 116.01),
        ("d", 40.0, 116.02),
    ]
    road = {
        ("o", "a"): 1.0,
        ("o", "b"): 1.0,
        ("a", "d"): 1.0,
        ("b", "d"): 1.0,
        ("o", "d"): 2.5,
        ("a", "b"): 0.9,
    }
    return make_network(stops, [("r1", ["o", "a", "d"])], road=road)


def oracle_directness_tables(graph):
    """Hand-expanded A(p, q)/B(q) sums, independent of the library tables.

    Transit distances come from exhaustive path enumeration; ratios follow
    the shared convention (self pairs and unreachable pairs contribute 0).
    """
    paths = enumerate_paths(graph)
    nodes = graph.nodes

    def delta(u, v):
        if u == v:
            return 0.0
        best = math.inf
        for p in paths:
            if u in p and v in p and p.index(u) < p.index(v):
                i, j = p.index(u), p.index(v)
                best = min(best, sum(graph.edge_km[(p[k], p[k + 1])] for k in range(i, j)))
        return best

    def ratio(u, v):
        if u == v:
            return 0.0
        d = delta(u, v)
        road = graph.network.road_distance(u, v)
        return 0.0 if math.isinf(d) or road <= 0 else d / road

    def a(p, q):
        qi = graph.topo_index[q]
        return sum(ratio(p, v) for v in nodes[qi:])

    def b(q):
        qi = graph.topo_index[q]
        total = 0.0
        for vi in range(qi, len(nodes)):
            for ui in range(qi + 1, vi):
                total += ratio(nodes[ui], nodes[vi])
        return total

    return a, b


def oracle_subspace_directness(graph, prefix):
    """Hand expansion: decided prefix pairs exactly, plus the A/B estimate."""
    a, b = oracle_directness_tables(graph)
    tail = prefix[-1]
    n = sum(1 for p in enumerate_paths(graph, source=tail))
    estimate = (sum(a(u, tail) for u in prefix) + b(tail)) / n

    paths = enumerate_paths(graph)

    def delta(u, v):
        best = math.inf
        for p in paths:
            if u in p and v in p and p.index(u) < p.index(v):
                i, j = p.index(u), p.index(v)
                best = min(best, sum(graph.edge_km[(p[k], p[k + 1])] for k in range(i, j)))
        return best

    decided = 0.0
    inner = prefix[:-1]
    for i in range(len(inner)):
        for j in range(i + 1, len(inner)):
            d = delta(inner[i], inner[j])
            road = graph.network.road_distance(inner[i], inner[j])
            if not math.isinf(d) and road > 0:
                decided += d / road
    return decided + estimate


def completions(graph, prefix):
    """All full routes extending a prefix (prefix tail -> destination paths)."""
    return [tuple(prefix[:-1]) + p for p in enumerate_paths(graph, source=prefix[-1])]


def write_corpus(root, rows=4, cols=5, spacing_deg=0.008, n_cards=40, seed=2):
    """Small on-disk CSV corpus: a stop grid, three routes, and trips with
    occasional transfers. Returns the directory path."""
    rng = random.Random(seed)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    stop_rows = []
    for i in range(rows):
        for j in range(cols):
            stop_rows.append((f"g{i}{j}", f"Stop {i}-{j}", 40.0 + i * spacing_deg, 116.0 + j * spacing_deg))
    (root / "stops.csv").write_text(
        "stop_id,name,lat,lon\n"
        + "".join(f"{s},{n},{la:.6f},{lo:.6f}\n" for s, n, la, lo in stop_rows),
        encoding="utf-8",
    )

    routes = {
        "east": [f"g0{j}" for j in range(cols)],
        "west": [f"g{rows-1}{j}" for j in range(cols - 1, -1, -1)],
        "cross": [f"g{i}0" for i in range(rows)] + [f"g{rows-1}{j}" for j in range(1, cols)],
    }
    (root / "routes.csv").write_text(
        "route_id,stop_ids\n"
        + "".join(f"{rid},{'|'.join(stops)}\n" for rid, stops in routes.items()),
        encoding="utf-8",
    )

    lines = ["card_id,tap_on,route_id,board_stop_id,alight_stop_id\n"]
    for c in range(n_cards):
        rid = rng.choice(list(routes))
        stops = routes[rid]
        bi = rng.randrange(0, len(stops) - 1)
        ai = rng.randrange(bi + 1, len(stops))
        minute = rng.randrange(0, 600)
        t_on = T0 + timedelta(minutes=minute)
        lines.append(f"card{c},{t_on.isoformat().replace('+00:00', 'Z')},{rid},{stops[bi]},{stops[ai]}\n")
        if rng.random() < 0.4:
            # same-card follow-up trip on another route from a nearby stop
            other = rng.choice([r for r in routes if r != rid])
            ostops = routes[other]
            t2 = t_on + timedelta(minutes=rng.randrange(20, 50))
            obi = rng.randrange(0, len(ostops) - 1)
            oai = rng.randrange(obi + 1, len(ostops))
            lines.append(
                f"card{c},{t2.isoformat().replace('+00:00', 'Z')},{other},{ostops[obi]},{ostops[oai]}\n"
            )
    (root / "trips.csv").write_text("".join(lines), encoding="utf-8")
    return root


# --- enumeration oracles ---------------------------------------------------


def enumerate_paths(graph, source=None, target=None):
    """All source->target paths of a StationGraph by DFS (test-size graphs)."""
    source = source or graph.origin
    target = target or graph.destination
    out = []
    stack = [(source, (source,))]
    while stack:
        node, path = stack.pop()
        if node == target:
            out.append(path)
            continue
        for nxt in graph.successors(node):
            stack.append((nxt, path + (nxt,)))
    return sorted(out)


def brute_pareto(routes_with_values, dominates):
    """Pairwise-dominance Pareto filter over (route, CriterionVector) pairs."""
    keep = []
    for r, v in routes_with_values:
        if not any(dominates(v2, v) for r2, v2 in routes_with_values if r2 != r):
            keep.append((r, v))
    return keep


def random_geometric_network(rng: random.Random, n_stops: int, box_km: float = 3.5):
    """Random stops in a small box; roads fall back to haversine * 1.3."""
    lat0, lon0 = 40.0, 116.0
    stops = []
    for i in range(n_stops):
        dy = rng.uniform(0, box_km) / 111.2
        dx = rng.uniform(0, box_km) / (111.2 * math.cos(math.radians(lat0)))
        stops.append((f"s{i:02d}", lat0 + dy, lon0 + dx))
    return make_network(stops, routes=[])


def random_station_graph(
    seed: int,
    max_nodes: int = 12,
    max_paths: int = 500,
    n_stops=(6, 12),
    anchored: bool = False,
):
    """Random feasible station graph within the enumeration-friendly bounds.

    Retries fresh layouts until the built graph fits the node/path budget.
    Returns (network, graph).
    """
    from busnet.graph import EmptyGraphError, GraphParams, build_anchored_graph

    rng = random.Random(seed)
    params = GraphParams(min_spacing_km=0.2, max_spacing_km=2.0, progress_slack=0.5)
    while True:
        net = random_geometric_network(rng, rng.randint(*n_stops))
        ids = sorted(net.stops)
        best = None
        for u in ids:
            for v in ids:
                if u < v:
                    d = net.road_distance(u, v)
                    if best is None or d > best[0]:
                        best = (d, u, v)
        _, o, d = best
        sets = [[o], [d]]
        if anchored:
            interior = [s for s in ids if s not in (o, d)]
            if interior:
                sets = [[o], [rng.choice(interior)], [d]]
        try:
            graph = build_anchored_graph(net, sets, params)
        except (EmptyGraphError, ValueError):
            continue
        if graph.n_nodes <= max_nodes and graph.paths_to_dest[o] <= max_paths and graph.paths_to_dest[o] >= 1:
            if anchored and graph.n_nodes < 3:
                continue
            return net, graph
