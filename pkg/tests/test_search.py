import itertools
import math
import random

import pytest

from busnet.criteria import CostParams, CriterionVector, SubspaceTables
from busnet.graph import GraphParams, build_station_graph
from busnet.search import (
    EXHAUSTED,
    PAUSED,
    RUNNING,
    ParetoSet,
    SearchParams,
    SessionStateError,
    create_session,
    dominates,
    edit_stations,
    expand,
    select,
    simulate,
    step,
)

from conftest import demand_from_pairs, enumerate_paths, make_network, random_station_graph

COST = CostParams()


def vec(time=1.0, flow=0.0, direct=1.0, constr=1.0, scost=1.0):
    return CriterionVector(time, flow, direct, constr, scost)


def chain2_session(**kwargs):
    stops = [("o", 40.0, 116.0), ("d", 40.0, 116.012)]
    net = make_network(stops, routes=[], road={("o", "d"): 1.0})
    graph = build_station_graph(net, "o", "d", GraphParams(0.3, 1.5, 0.5))
    return create_session(graph, demand_from_pairs({}), COST, **kwargs)


def chain3_session(**kwargs):
    stops = [("o", 40.0, 116.0), ("a", 40.0, 116.012), ("d", 40.0, 116.024)]
    net = make_network(stops, routes=[], road={("o", "a"): 1.0, ("a", "d"): 1.0, ("o", "d"): 2.0})
    graph = build_station_graph(net, "o", "d", GraphParams(0.3, 1.5, 0.5))
    return create_session(graph, demand_from_pairs({}), COST, **kwargs)


def diamond_session(symmetric=True, **kwargs):
    stops = [
        ("o", 40.0, 116.0),
        ("a", 40.004, 116.01),
        ("b", 39.996, 116.01),
        ("d", 40.0, 116.02),
    ]
    far = 1.0 if symmetric else 1.8
    road = {
        ("o", "a"): 1.0,
        ("o", "b"): far,
        ("a", "d"): 1.0,
        ("b", "d"): far,
        ("o", "d"): 2.5,
        ("a", "b"): 0.2,
    }
    net = make_network(stops, routes=[], road=road)
    graph = build_station_graph(net, "o", "d", PARAMS_DIAMOND)
    return create_session(graph, demand_from_pairs({}), COST, **kwargs)


PARAMS_DIAMOND = GraphParams(0.3, 2.0, 0.5)


def run_to_exhaustion(session, cap=200_000):
    session.resume()
    snap = step(session, cap)
    assert session.status == EXHAUSTED
    return snap


def brute_front(graph, demand, cost=COST):
    tables = SubspaceTables(graph, demand, cost)
    routes = enumerate_paths(graph)
    vals = {r: tables.evaluate(r) for r in routes}
    front = {
        r
        for r in routes
        if not any(dominates(vals[q], vals[r]) for q in routes if q != r)
    }
    return front, vals


def random_demand(graph, seed):
    rng = random.Random(seed)
    pairs = {}
    for u in graph.nodes:
        for v in graph.nodes:
            if u != v and rng.random() < 0.5:
                pairs[(u, v)] = rng.randint(1, 30)
    return demand_from_pairs(pairs)


def check_hits(session):
    def walk(node):
        expected = sum(
            1
            for r in session.pareto.routes
            if r[: len(node.prefix)] == node.prefix
        )
        assert node.pareto_hits == expected
        assert node.pareto_hits <= len(session.pareto)
        for c in node.children.values():
            walk(c)

    walk(session.root)


class TestDominates:
    def test_better_time_and_flow(self):
        a = vec(time=10, flow=500)
        b = vec(time=12, flow=400)
        assert dominates(a, b) and not dominates(b, a)

    def test_tradeoff_neither_dominates(self):
        a = vec(time=10, flow=400)
        b = vec(time=12, flow=500)
        assert not dominates(a, b) and not dominates(b, a)

    def test_equal_vectors_do_not_dominate(self):
        a = vec()
        assert not dominates(a, a)


class TestParetoSet:
    def test_dominated_candidate_rejected(self):
        ps = ParetoSet()
        ps.add_batch([(("o", "d"), vec(time=1, flow=10))])
        inserted, evicted = ps.add_batch([(("o", "a", "d"), vec(time=2, flow=5))])
        assert not inserted and not evicted and len(ps) == 1

    def test_candidate_evicts_two(self):
        ps = ParetoSet()
        ps.add_batch(
            [
                (("o", "a", "d"), vec(time=3, flow=5)),
                (("o", "b", "d"), vec(time=4, flow=6, direct=2)),
            ]
        )
        inserted, evicted = ps.add_batch([(("o", "d"), vec(time=1, flow=10))])
        assert len(inserted) == 1 and len(evicted) == 2 and len(ps) == 1

    def test_batch_order_independent(self):
        routes = [
            (("r1",), vec(time=3, flow=10)),
            (("r2",), vec(time=2, flow=10)),
            (("r3",), vec(time=4, flow=20)),
            (("r4",), vec(time=2, flow=5)),
            (("r5",), vec(time=4, flow=20)),
        ]
        results = set()
        for perm in itertools.permutations(routes):
            ps = ParetoSet()
            ps.add_batch(list(perm))
            results.add(frozenset(ps.routes))
        assert len(results) == 1


class TestCreateSession:
    def test_initial_snapshot(self):
        session = chain3_session()
        snap = session.snapshot()
        assert snap.pareto_count == 0 and snap.iteration == 0
        assert session.status == PAUSED

    def test_infeasible_ranges(self):
        with pytest.raises(ValueError):
            chain3_session(ranges={"service_time": (2.0, 1.0)})

    def test_chain_one_step_finds_the_route(self):
        session = chain3_session()
        session.resume()
        snap = step(session, 1)
        assert snap.pareto_count == 1

    def test_step_on_paused_session_errors(self):
        session = chain3_session()
        with pytest.raises(SessionStateError):
            step(session, 1)


class TestSelect:
    def test_ucb_arithmetic_fixture(self):
        session = diamond_session(params=SearchParams(k=2), seed=1)
        session.resume()
        step(session, 1)  # expands both arms
        root = session.root
        assert set(root.children) == {"a", "b"}
        root.visits = 7
        root.children["a"].visits, root.children["a"].pareto_hits = 5, 3
        root.children["b"].visits, root.children["b"].pareto_hits = 2, 1
        score_a = 3 / 5 + math.sqrt(2) * math.sqrt(math.log(7) / 5)
        score_b = 1 / 2 + math.sqrt(2) * math.sqrt(math.log(7) / 2)
        assert score_a == pytest.approx(1.4822, abs=1e-4)
        assert score_b == pytest.approx(1.8950, abs=1e-4)
        assert select(session).stop == "b"

    def test_unvisited_child_selected_unconditionally(self):
        session = diamond_session(params=SearchParams(k=2), seed=1)
        session.resume()
        step(session, 1)
        root = session.root
        root.visits = 100
        root.children["a"].visits, root.children["a"].pareto_hits = 99, 99
        root.children["b"].visits = 0
        assert select(session).stop == "b"

    def test_single_chain_descends_to_frontier(self):
        session = chain3_session()
        session.resume()
        step(session, 1)
        # root fully expanded -> selection must descend into the only child
        assert select(session).stop == "a"


class TestExpand:
    def test_top_1_picks_highest_gain(self):
        session = diamond_session(symmetric=False, seed=3)
        session.resume()
        node = select(session)
        created = expand(session, node)
        assert len(created) == 1
        assert created[0].stop == "a"  # the short arm wins every criterion

    def test_diamond_k2_expands_both(self):
        session = diamond_session(params=SearchParams(k=2), seed=3)
        session.resume()
        node = select(session)
        created = expand(session, node)
        assert {c.stop for c in created} == {"a", "b"}

    def test_range_pruned_neighbour_excluded(self):
        # service-time lower bound of the long arm exceeds the range cap
        session = diamond_session(symmetric=False, ranges={"service_time": (None, 0.15)}, seed=3)
        session.resume()
        node = select(session)
        created = expand(session, node)
        assert {c.stop for c in created} == {"a"}
        assert "b" in node.dismissed


class TestSimulate:
    def test_chain_returns_unique_route(self):
        session = chain3_session(seed=11)
        session.resume()
        children = expand(session, select(session))
        route = simulate(session, children[0])
        assert route == ("o", "a", "d")

    def test_diamond_smoke_both_routes_observed(self):
        session = diamond_session(symmetric=False, seed=5)
        seen = set()
        for _ in range(4000):
            seen.add(simulate(session, session.root))
        assert ("o", "a", "d") in seen and ("o", "b", "d") in seen

    def test_predecessor_of_destination_completes_in_one_step(self):
        session = chain3_session(seed=2)
        session.resume()
        step(session, 2)
        node_a = session.root.children["a"]
        assert simulate(session, node_a) == ("o", "a", "d")


class TestExhaustion:
    def test_two_stop_chain_exhausts_in_one_iteration(self):
        session = chain2_session()
        session.resume()
        snap = step(session, 1)
        assert session.status == EXHAUSTED
        assert snap.pareto_count == 1

    def test_exhaustion_equals_bruteforce(self):
        for seed in range(18):
            for k in (1, 4):
                net, graph = random_station_graph(seed)
                demand = random_demand(graph, seed)
                front, _ = brute_front(graph, demand)
                session = create_session(
                    graph, demand, COST, params=SearchParams(k=k), seed=seed
                )
                run_to_exhaustion(session)
                assert set(session.pareto.routes) == front
                check_hits(session)

    def test_pareto_always_mutually_nondominating(self):
        net, graph = random_station_graph(4)
        demand = random_demand(graph, 4)
        session = create_session(graph, demand, COST, params=SearchParams(k=2), seed=4)
        session.resume()
        while session.status == RUNNING:
            step(session, 3)
            items = list(session.pareto.items())
            for (r1, v1) in items:
                for (r2, v2) in items:
                    if r1 != r2:
                        assert not dominates(v1, v2)
            if session.iteration > 500:
                break


class TestPruning:
    def test_emitted_routes_respect_ranges(self):
        for seed in range(10):
            net, graph = random_station_graph(seed)
            demand = random_demand(graph, seed + 50)
            _, vals = brute_front(graph, demand)
            times = sorted(v.service_time for v in vals.values())
            cap = times[len(times) // 2]
            ranges = {"service_time": (None, cap)}
            session = create_session(
                graph, demand, COST, params=SearchParams(k=2), ranges=ranges, seed=seed
            )
            run_to_exhaustion(session)
            for _r, v in session.pareto.items():
                assert v.service_time <= cap
            satisfying = {r for r, v in vals.items() if v.service_time <= cap}
            want = {
                r
                for r in satisfying
                if not any(dominates(vals[q], vals[r]) for q in satisfying if q != r)
            }
            assert set(session.pareto.routes) == want


class TestAnchoring:
    def test_anchored_routes_contain_anchor_in_order(self):
        for seed in range(12):
            net, graph = random_station_graph(seed, anchored=True)
            if len(graph.stop_sets) < 3:
                continue
            anchor = graph.stop_sets[1][0]
            demand = random_demand(graph, seed)
            session = create_session(graph, demand, COST, params=SearchParams(k=2), seed=seed)
            run_to_exhaustion(session)
            assert len(session.pareto) >= 1
            for route in session.pareto.routes:
                assert anchor in route
                assert route.index(graph.origin) < route.index(anchor) < route.index(graph.destination)


class TestEditStations:
    def test_removals_evict_pareto_routes(self):
        session = diamond_session(params=SearchParams(k=2), seed=9)
        run_to_exhaustion(session)
        before = len(session.pareto)
        assert before == 2
        edit_stations(session, remove={"b"})
        assert len(session.pareto) == 1
        assert all("b" not in r for r in session.pareto.routes)
        check_hits(session)

    def test_remove_then_readd_matches_never_removed(self):
        for seed in (0, 3, 5):
            net, graph = random_station_graph(seed, n_stops=(8, 12))
            demand = random_demand(graph, seed)
            baseline = create_session(graph, demand, COST, params=SearchParams(k=2), seed=seed)
            run_to_exhaustion(baseline)

            session = create_session(graph, demand, COST, params=SearchParams(k=2), seed=seed)
            session.resume()
            step(session, 3)
            candidates = [
                s for s in graph.nodes if s not in (graph.origin, graph.destination)
            ]
            if not candidates:
                continue
            target = candidates[0]
            from busnet.graph import EmptyGraphError

            session.pause()
            try:
                edit_stations(session, remove={target})
            except EmptyGraphError:
                continue
            edit_stations(session, add={target})
            session.resume()
            step(session, 200_000)
            assert session.status == EXHAUSTED
            assert set(session.pareto.routes) == set(baseline.pareto.routes)

    def test_removing_anchor_rejected(self):
        session = chain3_session()
        from busnet.graph import ConstraintError

        with pytest.raises(ConstraintError):
            edit_stations(session, remove={"o"})


class TestDeterminism:
    def test_same_seed_same_snapshots(self):
        runs = []
        for _ in range(2):
            net, graph = random_station_graph(6)
            demand = random_demand(graph, 6)
            session = create_session(graph, demand, COST, params=SearchParams(k=3), seed=42)
            session.resume()
            wires = []
            while session.status == RUNNING:
                wires.append(step(session, 5).to_wire())
            runs.append(wires)
        assert runs[0] == runs[1]


class TestStatusTransitions:
    def test_pause_resume_stop(self):
        session = chain3_session()
        session.resume()
        assert session.status == RUNNING
        session.pause()
        assert session.status == PAUSED
        session.stop()
        with pytest.raises(SessionStateError):
            session.resume()

    def test_step_after_stop_errors(self):
        session = chain3_session()
        session.stop()
        with pytest.raises(SessionStateError):
            step(session, 1)
