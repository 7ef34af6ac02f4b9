import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from busnet.criteria import (
    CostParams,
    DWELL_HOURS,
    RouteEvaluationError,
    SubspaceTables,
    criterion_bounds,
    evaluate_route,
    load_cost_params,
    precompute_directness_tables,
    service_cost,
    subspace_construction_cost,
    subspace_directness,
    subspace_mean_flow,
    subspace_service_time,
)
from busnet.graph import GraphParams, build_station_graph
from conftest import (
    completions,
    demand_from_pairs,
    enumerate_paths,
    make_network,
    oracle_subspace_directness,
    random_station_graph,
)

PARAMS = GraphParams(min_spacing_km=0.3, max_spacing_km=2.0, progress_slack=0.5)
COST = CostParams()


def chain3_graph():
    stops = [("o", 40.0, 116.0), ("a", 40.0, 116.012), ("d", 40.0, 116.024)]
    road = {("o", "a"): 1.0, ("a", "d"): 1.0, ("o", "d"): 2.0}
    net = make_network(stops, routes=[], road=road)
    return net, build_station_graph(net, "o", "d", GraphParams(0.3, 1.5, 0.5))


def diamond_graph(diamond_network):
    return build_station_graph(diamond_network, "o", "d", PARAMS)


def random_demand(graph, seed, max_count=40):
    rng = random.Random(seed)
    pairs = {}
    nodes = list(graph.nodes)
    for u in nodes:
        for v in nodes:
            if u != v and rng.random() < 0.4:
                pairs[(u, v)] = rng.randint(1, max_count)
    return demand_from_pairs(pairs)


class TestServiceCost:
    def test_paper_fixture_exact(self):
        cost = CostParams(
            per_stop_cost=50,
            headway=0.25,
            service_span=18,
            crew_wage=30,
            fuel_cost=1.2,
            maintenance_cost=0.8,
            speed=20,
        )
        assert service_cost(1.5, cost) == 15120.0

    @given(t=st.floats(min_value=0.01, max_value=100))
    def test_doubling_time_doubles_cost(self, t):
        assert service_cost(2 * t, COST) == pytest.approx(2 * service_cost(t, COST))

    @given(t=st.floats(min_value=0.01, max_value=100))
    def test_halving_headway_doubles_cost(self, t):
        halved = CostParams(headway=COST.headway / 2)
        assert service_cost(t, halved) == pytest.approx(2 * service_cost(t, COST))

    def test_positive_params_enforced(self):
        with pytest.raises(ValueError):
            CostParams(headway=0)


class TestDirectnessTables:
    def test_chain_hand_values(self):
        _, graph = chain3_graph()
        tables = precompute_directness_tables(graph)
        assert tables.a("o", "o") == pytest.approx(2.0)  # pairs o-a and o-d
        assert tables.b("o") == pytest.approx(1.0)  # pair a-d
        assert tables.b("d") == 0.0
        assert tables.a("o", "d") == pytest.approx(1.0)  # only the o-d ratio

    def test_destination_column(self):
        _, graph = chain3_graph()
        tables = precompute_directness_tables(graph)
        # A(p, d) is the single p-d ratio; B(d) has empty inner ranges
        assert tables.a("a", "d") == pytest.approx(1.0)
        assert tables.b("d") == 0.0

    def test_tables_match_hand_expansion_on_random_graphs(self):
        from conftest import oracle_directness_tables

        for seed in range(10):
            _, graph = random_station_graph(seed)
            tables = precompute_directness_tables(graph)
            a, b = oracle_directness_tables(graph)
            for p in graph.nodes:
                for q in graph.nodes:
                    assert tables.a(p, q) == pytest.approx(a(p, q), abs=1e-9)
            for q in graph.nodes:
                assert tables.b(q) == pytest.approx(b(q), abs=1e-9)


class TestSubspaceDirectness:
    def test_chain_equals_pairwise_sum(self):
        net, graph = chain3_graph()
        tables = precompute_directness_tables(graph)
        value = subspace_directness(("o",), tables, graph)
        assert value == pytest.approx(3.0, abs=1e-9)

    def test_full_prefix_equals_route_evaluation(self):
        net, graph = chain3_graph()
        tables = precompute_directness_tables(graph)
        demand = demand_from_pairs({})
        vec = evaluate_route(("o", "a", "d"), net, graph, demand, COST)
        value = subspace_directness(("o", "a", "d"), tables, graph)
        assert value == pytest.approx(vec.directness, abs=1e-9)

    def test_diamond_prefix_o_frozen_value(self, diamond_network):
        # hand expansion: A(o,o) = 1 + 1 + 2/2.5 = 2.8, B(o) = 2, N = 2
        graph = diamond_graph(diamond_network)
        tables = precompute_directness_tables(graph)
        assert subspace_directness(("o",), tables, graph) == pytest.approx(2.4, abs=1e-9)

    def test_matches_oracle_on_random_prefixes(self):
        rng = random.Random(0)
        for seed in range(10):
            _, graph = random_station_graph(seed)
            tables = precompute_directness_tables(graph)
            paths = enumerate_paths(graph)
            path = paths[rng.randrange(len(paths))]
            for k in range(1, len(path) + 1):
                prefix = path[:k]
                got = subspace_directness(prefix, tables, graph)
                want = oracle_subspace_directness(graph, prefix)
                assert got == pytest.approx(want, abs=1e-9)

    def test_chain_equality_on_random_chain_graphs(self):
        # on any chain graph the subspace value equals the route's pairwise sum
        rng = random.Random(3)
        for trial in range(8):
            k = rng.randint(3, 7)
            stops = [(f"s{i}", 40.0, 116.0 + 0.012 * i) for i in range(k)]
            road = {}
            for i in range(k):
                for j in range(i + 1, k):
                    road[(f"s{i}", f"s{j}")] = (j - i) * 1.0 + (0.1 * rng.random() if j - i > 1 else 0.0)
            net = make_network(stops, routes=[], road=road)
            graph = build_station_graph(net, "s0", f"s{k-1}", GraphParams(0.3, 1.2, 0.5))
            assert graph.paths_to_dest["s0"] == 1
            tables = precompute_directness_tables(graph)
            route = tuple(f"s{i}" for i in range(k))
            vec = evaluate_route(route, net, graph, demand_from_pairs({}), COST)
            got = subspace_directness(("s0",), tables, graph)
            assert got == pytest.approx(vec.directness, abs=1e-9)


class TestSubspaceConstruction:
    def test_diamond_fixture(self, diamond_network):
        graph = diamond_graph(diamond_network)
        assert subspace_construction_cost(graph, ("o",), 1.0) == pytest.approx(3.0, abs=1e-12)

    def test_chain_prefix_origin(self):
        _, graph = chain3_graph()
        assert subspace_construction_cost(graph, ("o",), 7.0) == pytest.approx(21.0)

    def test_matches_enumeration_mean(self):
        for seed in range(12):
            _, graph = random_station_graph(seed)
            cs = 3.5
            for path in enumerate_paths(graph)[:4]:
                for k in range(1, len(path) + 1):
                    prefix = path[:k]
                    comps = completions(graph, prefix)
                    want = sum(len(c) * cs for c in comps) / len(comps)
                    got = subspace_construction_cost(graph, prefix, cs)
                    assert got == pytest.approx(want, abs=1e-9)


class TestSubspaceMeans:
    def test_service_time_matches_enumeration_mean(self):
        for seed in range(8):
            _, graph = random_station_graph(seed)
            for path in enumerate_paths(graph)[:3]:
                prefix = path[: max(1, len(path) // 2)]
                comps = completions(graph, prefix)
                want = np.mean(
                    [
                        sum(graph.edge_km[(c[i], c[i + 1])] for i in range(len(c) - 1)) / COST.speed
                        + DWELL_HOURS * (len(c) - 2)
                        for c in comps
                    ]
                )
                got = subspace_service_time(graph, prefix, COST)
                assert got == pytest.approx(want, abs=1e-9)

    def test_mean_flow_matches_enumeration_mean(self):
        for seed in range(8):
            _, graph = random_station_graph(seed)
            demand = random_demand(graph, seed)
            for path in enumerate_paths(graph)[:3]:
                prefix = path[: max(1, len(path) // 2)]
                comps = completions(graph, prefix)
                want = np.mean(
                    [
                        sum(
                            demand.get(c[i], c[j])
                            for i in range(len(c))
                            for j in range(i + 1, len(c))
                        )
                        for c in comps
                    ]
                )
                got = subspace_mean_flow(graph, prefix, demand)
                assert got == pytest.approx(want, abs=1e-9)


class TestEvaluateRoute:
    def test_chain_directness_three(self):
        net, graph = chain3_graph()
        vec = evaluate_route(("o", "a", "d"), net, graph, demand_from_pairs({}), COST)
        assert vec.directness == pytest.approx(3.0, abs=1e-9)

    def test_ten_stop_construction_cost(self):
        k = 10
        stops = [(f"s{i}", 40.0, 116.0 + 0.012 * i) for i in range(k)]
        road = {(f"s{i}", f"s{j}"): (j - i) * 1.0 for i in range(k) for j in range(i + 1, k)}
        net = make_network(stops, routes=[], road=road)
        graph = build_station_graph(net, "s0", f"s{k-1}", GraphParams(0.3, 1.2, 0.5))
        cost = CostParams(per_stop_cost=50)
        vec = evaluate_route(tuple(f"s{i}" for i in range(k)), net, graph, demand_from_pairs({}), cost)
        assert vec.construction_cost == 500.0

    def test_flow_matches_bruteforce_pair_sum(self):
        for seed in range(6):
            net, graph = random_station_graph(seed)
            demand = random_demand(graph, seed + 100)
            for route in enumerate_paths(graph)[:5]:
                vec = evaluate_route(route, net, graph, demand, COST)
                want = sum(
                    demand.get(route[i], route[j])
                    for i in range(len(route))
                    for j in range(i + 1, len(route))
                )
                assert vec.passenger_flow == pytest.approx(want)

    def test_non_path_rejected(self):
        net, graph = chain3_graph()
        with pytest.raises(RouteEvaluationError):
            evaluate_route(("a", "o"), net, graph, demand_from_pairs({}), COST)

    def test_interior_stop_strictly_increases_time_and_cost(self):
        stops = [("o", 40.0, 116.0), ("a", 40.0, 116.012), ("d", 40.0, 116.024)]
        road = {("o", "a"): 1.0, ("a", "d"): 1.0, ("o", "d"): 2.0}
        net = make_network(stops, routes=[], road=road)
        graph = build_station_graph(net, "o", "d", PARAMS)
        demand = demand_from_pairs({})
        short = evaluate_route(("o", "d"), net, graph, demand, COST)
        long = evaluate_route(("o", "a", "d"), net, graph, demand, COST)
        assert long.service_time > short.service_time
        assert long.construction_cost > short.construction_cost


class TestBounds:
    def test_chain_bounds_degenerate(self):
        net, graph = chain3_graph()
        demand = demand_from_pairs({("o", "d"): 4})
        route = ("o", "a", "d")
        vec = evaluate_route(route, net, graph, demand, COST)
        for criterion in ("service_time", "construction_cost", "service_cost"):
            b = criterion_bounds(graph, "a", ("o",), criterion, demand=demand, cost=COST)
            assert b.lo == pytest.approx(b.hi)
            assert b.lo == pytest.approx(vec.get(criterion))

    def test_asymmetric_diamond_brackets_both_arms(self):
        stops = [
            ("o", 40.0, 116.0),
            ("a", 40.004, 116.01),
            ("b", 39.996, 116.01),
            ("d", 40.0, 116.02),
        ]
        road = {
            ("o", "a"): 1.0,
            ("a", "d"): 1.0,
            ("o", "b"): 2.0,
            ("b", "d"): 3.0,
            ("o", "d"): 5.5,
            ("a", "b"): 0.3,
        }
        net = make_network(stops, routes=[], road=road)
        graph = build_station_graph(net, "o", "d", GraphParams(0.5, 4.0, 0.5))
        demand = demand_from_pairs({})
        routes = enumerate_paths(graph)
        assert len(routes) == 2
        times = [
            evaluate_route(r, net, graph, demand, COST).service_time for r in routes
        ]
        lo = min(
            criterion_bounds(graph, s, ("o",), "service_time", cost=COST).lo
            for s in graph.successors("o")
        )
        hi = max(
            criterion_bounds(graph, s, ("o",), "service_time", cost=COST).hi
            for s in graph.successors("o")
        )
        assert lo == pytest.approx(min(times))
        assert hi == pytest.approx(max(times))

    def test_soundness_on_random_instances(self):
        for seed in range(10):
            net, graph = random_station_graph(seed)
            demand = random_demand(graph, seed + 7)
            tables = SubspaceTables(graph, demand, COST)
            for path in enumerate_paths(graph)[:6]:
                for k in range(1, len(path)):
                    prefix, nxt = path[:k], path[k]
                    comps = completions(graph, prefix + (nxt,))
                    for criterion in (
                        "service_time",
                        "passenger_flow",
                        "directness",
                        "construction_cost",
                        "service_cost",
                    ):
                        b = criterion_bounds(graph, nxt, prefix, criterion, demand=demand, cost=COST)
                        for c in comps:
                            value = tables.evaluate(c).get(criterion)
                            assert b.lo - 1e-9 <= value <= b.hi + 1e-9


def test_load_cost_params(tmp_path):
    toml = tmp_path / "cost.toml"
    toml.write_text("per_stop_cost = 10.0\nheadway = 0.5\n", encoding="utf-8")
    params = load_cost_params(toml)
    assert params.per_stop_cost == 10.0 and params.headway == 0.5
    js = tmp_path / "cost.json"
    js.write_text('{"speed": 25.0}', encoding="utf-8")
    assert load_cost_params(js).speed == 25.0
    bad = tmp_path / "bad.json"
    bad.write_text('{"velocity": 1}', encoding="utf-8")
    with pytest.raises(ValueError):
        load_cost_params(bad)
