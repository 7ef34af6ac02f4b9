"""Monte-Carlo tree search over station graphs for Pareto-optimal routes.

Each cycle selects the most promising tree node by upper confidence bound,
expands up to k neighbouring stations chosen by averaged normalized gains,
simulates one gain-weighted random completion per expanded station, and
tests the candidate batch against the discovered Pareto set. Criterion
ranges prune neighbours whose estimated value range cannot overlap, and the
station set can be edited live without restarting the search. Running a
session to exhaustion enumerates the whole route space, so the final set
equals the brute-force Pareto set of range-satisfying routes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .criteria import (
    CRITERION_NAMES,
    HIGHER_IS_BETTER,
    CostParams,
    CriterionVector,
    SubspaceTables,
    criterion_bounds,
)
from .graph import StationGraph, edit_graph
from .network import DemandMatrix

RUNNING = "running"
PAUSED = "paused"
EXHAUSTED = "exhausted"
STOPPED = "stopped"


class SessionStateError(RuntimeError):
    """Raised when an operation is incompatible with the session status."""


def route_id(stops) -> str:
    digest = hashlib.md5("/".join(stops).encode("utf-8")).hexdigest()
    return digest[:12]


def dominates(a: CriterionVector, b: CriterionVector) -> bool:
    """True when a is at least as good everywhere and strictly better once."""
    strict = False
    for name in CRITERION_NAMES:
        va, vb = getattr(a, name), getattr(b, name)
        if name in HIGHER_IS_BETTER:
            if va < vb:
                return False
            strict = strict or va > vb
        else:
            if va > vb:
                return False
            strict = strict or va < vb
    return strict


class ParetoSet:
    """Mutually non-dominating routes keyed by their stop sequence."""

    def __init__(self):
        self.routes: dict[tuple[str, ...], CriterionVector] = {}

    def __len__(self):
        return len(self.routes)

    def __contains__(self, route):
        return tuple(route) in self.routes

    def items(self):
        return self.routes.items()

    def add_batch(self, batch):
        """Insert candidates, evict newly dominated incumbents.

        The final set does not depend on the order within the batch. Returns
        (inserted, evicted) as lists of stop sequences.
        """
        inserted: list[tuple[str, ...]] = []
        evicted: list[tuple[str, ...]] = []
        for route, vec in batch:
            route = tuple(route)
            if route in self.routes:
                continue
            if any(dominates(v2, vec) for v2 in self.routes.values()):
                continue
            doomed = [r2 for r2, v2 in self.routes.items() if dominates(vec, v2)]
            for r2 in doomed:
                del self.routes[r2]
                if r2 in inserted:
                    inserted.remove(r2)
                else:
                    evicted.append(r2)
            self.routes[route] = vec
            inserted.append(route)
        return inserted, evicted


class SearchNode:
    __slots__ = ("stop", "parent", "children", "visits", "pareto_hits", "dismissed", "exhausted", "_prefix")

    def __init__(self, stop: str, parent: "SearchNode | None"):
        self.stop = stop
        self.parent = parent
        self.children: dict[str, SearchNode] = {}
        self.visits = 0
        self.pareto_hits = 0
        self.dismissed: set[str] = set()
        self.exhausted = False
        self._prefix: tuple[str, ...] | None = None

    @property
    def prefix(self) -> tuple[str, ...]:
        if self._prefix is None:
            parts = []
            node = self
            while node is not None:
                parts.append(node.stop)
                node = node.parent
            self._prefix = tuple(reversed(parts))
        return self._prefix


@dataclass(frozen=True)
class SearchParams:
    c_ucb: float = math.sqrt(2.0)
    k: int = 1
    sim_retry_limit: int = 16
    gain_floor: float = 0.1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("parallel width k must be >= 1")
        if self.gain_floor <= 0:
            raise ValueError("gain_floor must be positive so every neighbour stays sampleable")


@dataclass
class RouteSummary:
    id: str
    stops: tuple[str, ...]
    criteria: CriterionVector


@dataclass
class ProgressSnapshot:
    iteration: int
    status: str
    pareto_count: int
    histograms: dict[str, list[int]]
    routes: list[RouteSummary]
    timestamp: datetime

    def to_wire(self) -> dict:
        return {
            "iteration": self.iteration,
            "status": self.status,
            "pareto_count": self.pareto_count,
            "histograms": self.histograms,
            "routes": [
                {"id": r.id, "stops": list(r.stops), "criteria": r.criteria.as_dict()}
                for r in self.routes
            ],
        }


class SearchSession:
    """State of one interactive Pareto route search."""

    def __init__(self, graph, demand, cost, params, ranges, seed):
        self.graph = graph
        self.demand = demand
        self.cost = cost
        self.params = params
        self.ranges = ranges
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.tables = SubspaceTables(graph, demand, cost)
        self.root = SearchNode(graph.origin, None)
        self.pareto = ParetoSet()
        self.status = PAUSED
        self.iteration = 0

    # status control ---------------------------------------------------------

    def resume(self):
        if self.status not in (PAUSED, RUNNING):
            raise SessionStateError(f"cannot resume a {self.status} session")
        self.status = RUNNING

    def pause(self):
        if self.status not in (PAUSED, RUNNING):
            raise SessionStateError(f"cannot pause a {self.status} session")
        self.status = PAUSED

    def stop(self):
        if self.status in (RUNNING, PAUSED, STOPPED):
            self.status = STOPPED
        # an exhausted session stays exhausted

    def snapshot(self) -> ProgressSnapshot:
        entries = sorted(self.pareto.items())
        routes = [RouteSummary(route_id(r), r, v) for r, v in entries]
        histograms = {}
        for name in CRITERION_NAMES:
            histograms[name] = _hist20([v.get(name) for _, v in entries])
        return ProgressSnapshot(
            iteration=self.iteration,
            status=self.status,
            pareto_count=len(routes),
            histograms=histograms,
            routes=routes,
            timestamp=datetime.now(timezone.utc),
        )


def _hist20(values) -> list[int]:
    if not values:
        return [0] * 20
    lo, hi = min(values), max(values)
    if hi <= lo:
        out = [0] * 20
        out[0] = len(values)
        return out
    counts, _ = np.histogram(values, bins=20, range=(lo, hi))
    return [int(c) for c in counts]


def create_session(
    graph: StationGraph,
    demand: DemandMatrix,
    cost: CostParams | None = None,
    params: SearchParams | None = None,
    ranges: dict | None = None,
    seed: int | None = None,
) -> SearchSession:
    """Fresh paused session: a root-only state tree and an empty Pareto set."""
    cost = cost or CostParams()
    params = params or SearchParams()
    clean_ranges: dict[str, tuple[float | None, float | None]] = {}
    for name, bounds in (ranges or {}).items():
        if name not in CRITERION_NAMES:
            raise ValueError(f"unknown criterion {name!r} in ranges")
        lo, hi = bounds
        if lo is not None and hi is not None and lo > hi:
            raise ValueError(f"infeasible range for {name}: lo > hi")
        if lo is not None or hi is not None:
            clean_ranges[name] = (lo, hi)
    return SearchSession(graph, demand, cost, params, clean_ranges, seed)


# ---------------------------------------------------------------------------
# gain accumulators
# ---------------------------------------------------------------------------


class _Walk:
    """Running prefix state; all per-candidate heuristics read from here.

    Vectors accumulate rows of the precomputed tables so extending the
    prefix costs O(n) and scoring one candidate costs O(1).
    """

    __slots__ = ("t", "AC", "RATC", "LC", "GC", "RC", "FC", "plen", "dwell", "length", "tail")

    def __init__(self, tables: SubspaceTables):
        self.t = tables
        n = tables.geo.n
        self.AC = np.zeros(n)
        self.RATC = np.zeros(n)
        self.LC = np.zeros(n)
        self.GC = np.zeros(n)
        self.RC = 0.0
        self.FC = 0.0
        self.plen = 0.0
        self.dwell = 0
        self.length = 0
        self.tail = -1

    def push(self, j: int):
        t = self.t
        geo, dem = t.geo, t.dem
        if self.tail >= 0:
            self.plen += geo.D[self.tail, j]
            if j != t.dest_index:
                self.dwell += 1
        self.RC += self.RATC[j]
        self.FC += self.LC[j]
        self.AC += geo.A[j]
        self.RATC += geo.ratio[j]
        self.LC += dem.dmat[j]
        self.GC += dem.g[j]
        self.length += 1
        self.tail = j

    def clone(self) -> "_Walk":
        w = _Walk.__new__(_Walk)
        w.t = self.t
        w.AC = self.AC.copy()
        w.RATC = self.RATC.copy()
        w.LC = self.LC.copy()
        w.GC = self.GC.copy()
        w.RC = self.RC
        w.FC = self.FC
        w.plen = self.plen
        w.dwell = self.dwell
        w.length = self.length
        w.tail = self.tail
        return w

    def candidate_values(self, js) -> list[tuple[float, float, float, float, float]]:
        """Subspace heuristic values of prefix+j, one 5-tuple per candidate:
        (service_time, passenger_flow, directness, construction_cost,
        service_cost). Scalar arithmetic: cohorts are tiny."""
        t = self.t
        geo, dem, ct, cost = t.geo, t.dem, t.cost_t, t.cost
        dest = t.dest_index
        d_row = geo.D[self.tail]
        k_cost = (cost.service_span / cost.headway) * (
            2.0 * cost.crew_wage + 2.0 * cost.speed * (cost.maintenance_cost + cost.fuel_cost)
        )
        out = []
        for j in js:
            time = (
                (self.plen + d_row[j]) / cost.speed
                + (2.0 / 60.0) * (self.dwell + (1 if j != dest else 0))
                + ct.t_mean[j]
            )
            constr = cost.per_stop_cost * (self.length + 1 + geo.h[j])
            direct = self.RC + (self.AC[j] + geo.a_diag[j] + geo.B[j]) / geo.npaths[j]
            flow = self.FC + self.LC[j] + self.GC[j] + dem.g_diag[j] + dem.psi[j]
            out.append((time, flow, direct, constr, k_cost * time))
        return out


_GAIN_ORIENT = tuple(1.0 if name in HIGHER_IS_BETTER else -1.0 for name in CRITERION_NAMES)


def _average_gains(values: list[tuple[float, ...]]) -> list[float]:
    """Min-max normalize each criterion across the cohort, oriented so higher
    is better, then average with equal weights."""
    m = len(values)
    totals = [0.0] * m
    for c, orient in enumerate(_GAIN_ORIENT):
        lo = hi = orient * values[0][c]
        for row in values:
            v = orient * row[c]
            if v < lo:
                lo = v
            elif v > hi:
                hi = v
        if hi > lo:
            span = hi - lo
            for i, row in enumerate(values):
                totals[i] += (orient * row[c] - lo) / span
        else:
            for i in range(m):
                totals[i] += 0.5
    inv = 1.0 / len(_GAIN_ORIENT)
    return [t * inv for t in totals]


def _walk_to(session: SearchSession, node: SearchNode) -> _Walk:
    walk = _Walk(session.tables)
    for stop in node.prefix:
        walk.push(session.graph.topo_index[stop])
    return walk


# ---------------------------------------------------------------------------
# search stages
# ---------------------------------------------------------------------------


def _unexpanded(session: SearchSession, node: SearchNode) -> list[str]:
    return [
        s
        for s in session.graph.successors(node.stop)
        if s not in node.children and s not in node.dismissed
    ]


def _mark_exhausted_upwards(session: SearchSession, node: SearchNode | None):
    while node is not None and not node.exhausted:
        if _unexpanded(session, node):
            return
        if not all(c.exhausted for c in node.children.values()):
            return
        node.exhausted = True
        node = node.parent


def select(session: SearchSession) -> SearchNode | None:
    """Descend by UCB to the first node with an unexpanded feasible neighbour.

    Returns None when the whole tree is exhausted. Unvisited children have an
    infinite bound and are taken unconditionally.
    """
    c_ucb = session.params.c_ucb
    while not session.root.exhausted:
        node = session.root
        while True:
            if _unexpanded(session, node):
                return node
            live = [c for c in node.children.values() if not c.exhausted]
            if not live:
                _mark_exhausted_upwards(session, node)
                break  # restart from the root
            best, best_score = None, -math.inf
            for child in sorted(live, key=lambda c: c.stop):
                if child.visits == 0:
                    best = child
                    break
                score = child.pareto_hits / child.visits + c_ucb * math.sqrt(
                    math.log(node.visits) / child.visits
                )
                if score > best_score:
                    best, best_score = child, score
            node = best
    return None


def expand(session: SearchSession, node: SearchNode) -> list[SearchNode]:
    """Grow up to k children by averaged normalized gain.

    Neighbours whose estimated criterion ranges cannot overlap the session
    ranges are dismissed permanently (until a station edit). Returns the
    newly created children, best gain first.
    """
    candidates = _unexpanded(session, node)
    if session.ranges:
        kept = []
        for s in candidates:
            ok = True
            for name, (lo, hi) in session.ranges.items():
                b = criterion_bounds(
                    session.graph, s, node.prefix, name, demand=session.demand, cost=session.cost
                )
                if not b.overlaps(lo, hi, tol=1e-9):
                    ok = False
                    break
            if ok:
                kept.append(s)
            else:
                node.dismissed.add(s)
        candidates = kept
    if not candidates:
        _mark_exhausted_upwards(session, node)
        return []

    walk = _walk_to(session, node)
    js = [session.graph.topo_index[s] for s in candidates]
    gains = _average_gains(walk.candidate_values(js))
    order = sorted(range(len(candidates)), key=lambda i: (-gains[i], candidates[i]))
    created = []
    for i in order[: session.params.k]:
        child = SearchNode(candidates[i], node)
        node.children[candidates[i]] = child
        if candidates[i] == session.graph.destination:
            child.exhausted = True
        # routes admitted before this node existed still pass through it
        prefix = child.prefix
        child.pareto_hits = sum(
            1 for r in session.pareto.routes if r[: len(prefix)] == prefix
        )
        created.append(child)
    return created


def simulate(session: SearchSession, node: SearchNode, walk: _Walk | None = None):
    """Complete the node's prefix to the destination by gain-weighted sampling.

    Sampling weights are the normalized average gains plus a small floor so
    every feasible neighbour keeps positive probability. Returns the route.
    """
    if node.stop == session.graph.destination:
        return node.prefix
    graph = session.graph
    succ_idx = session.tables.geo.succ_idx
    dest = session.tables.dest_index
    base = walk.clone() if walk is not None else _walk_to(session, node)
    floor = session.params.gain_floor
    rng = session.rng
    for _attempt in range(session.params.sim_retry_limit):
        w = base.clone()
        route = list(node.prefix)
        dead = False
        while w.tail != dest:
            js = succ_idx[w.tail]
            if len(js) == 0:
                dead = True
                break
            if len(js) == 1:
                pick = int(js[0])
            else:
                gains = _average_gains(w.candidate_values(js))
                total = sum(gains) + floor * len(gains)
                draw = rng.random() * total
                acc = 0.0
                pick = int(js[-1])
                for j, gain in zip(js, gains):
                    acc += gain + floor
                    if draw < acc:
                        pick = int(j)
                        break
            w.push(pick)
            route.append(graph.nodes[pick])
        if not dead:
            return tuple(route)
    return None  # dead-end signal


def backpropagate(session: SearchSession, candidates) -> SearchSession:
    """Test a batch of simulated routes against the Pareto set.

    Every candidate increments visits along its tree path; admitted routes
    update pareto_hits along theirs (and evicted incumbents decrement).
    Candidates violating an active criterion range are never admitted.
    """
    batch = []
    for route in candidates:
        if route is None:
            continue
        route = tuple(route)
        vec = session.tables.evaluate(route)
        if not _contains_in_order(route, session.graph.anchors):
            raise AssertionError("route violates the anchor order invariant")
        _bump_visits(session, route)
        if _within_ranges(session, vec):
            batch.append((route, vec))
    inserted, evicted = session.pareto.add_batch(batch)
    for route in inserted:
        _bump_hits(session, route, +1)
    for route in evicted:
        _bump_hits(session, route, -1)
    return session


def _within_ranges(session: SearchSession, vec: CriterionVector) -> bool:
    for name, (lo, hi) in session.ranges.items():
        v = vec.get(name)
        if lo is not None and v < lo:
            return False
        if hi is not None and v > hi:
            return False
    return True


def _contains_in_order(route, anchors) -> bool:
    it = iter(route)
    return all(a in it for a in anchors)


def _match_path(session: SearchSession, route):
    nodes = []
    node = session.root
    if node.stop != route[0]:
        return nodes
    nodes.append(node)
    for stop in route[1:]:
        node = node.children.get(stop)
        if node is None:
            break
        nodes.append(node)
    return nodes


def _bump_visits(session: SearchSession, route):
    for node in _match_path(session, route):
        node.visits += 1


def _bump_hits(session: SearchSession, route, delta: int):
    for node in _match_path(session, route):
        node.pareto_hits += delta


def step(session: SearchSession, iterations: int) -> ProgressSnapshot:
    """Run full search cycles until ``iterations`` or exhaustion; snapshot."""
    if session.status != RUNNING:
        raise SessionStateError(f"cannot step a {session.status} session")
    for _ in range(iterations):
        node = select(session)
        if node is None:
            session.status = EXHAUSTED
            break
        children = expand(session, node)
        session.iteration += 1
        if not children:
            continue
        walk = _walk_to(session, node)
        candidates = []
        for child in children:
            child_walk = walk.clone()
            child_walk.push(session.graph.topo_index[child.stop])
            route = simulate(session, child, walk=child_walk)
            if route is None:
                child.exhausted = True
            else:
                candidates.append(route)
        backpropagate(session, candidates)
        _mark_exhausted_upwards(session, node)
    if session.root.exhausted:
        session.status = EXHAUSTED
    return session.snapshot()


def edit_stations(session: SearchSession, add=(), remove=()) -> SearchSession:
    """Apply live station edits: rebuild the graph, surgically prune the tree,
    and re-test the Pareto set under the new geometry.

    Surviving Pareto routes are re-evaluated because in-graph transit
    distances (hence directness) depend on the station set; dominance is then
    re-established among the survivors. The search stays resumable.
    """
    new_graph = edit_graph(session.graph, add, remove)
    session.graph = new_graph
    session.tables = SubspaceTables(new_graph, session.demand, session.cost)

    # drop subtrees rooted at stops that left the graph
    def prune(node: SearchNode):
        for stop in list(node.children):
            child = node.children[stop]
            if stop not in new_graph.topo_index or not new_graph.has_edge(node.stop, stop):
                del node.children[stop]
            else:
                prune(child)

    prune(session.root)

    survivors = []
    for route, _old in session.pareto.items():
        if all(s in new_graph.topo_index for s in route) and all(
            new_graph.has_edge(u, v) for u, v in zip(route, route[1:])
        ):
            vec = session.tables.evaluate(route)
            if _within_ranges(session, vec):
                survivors.append((route, vec))
    session.pareto = ParetoSet()
    session.pareto.add_batch(survivors)

    # recompute exhaustion flags and pareto hit counts from scratch
    def refresh(node: SearchNode):
        node.dismissed = set()
        node.pareto_hits = 0
        for child in node.children.values():
            refresh(child)
        if node.stop == new_graph.destination:
            node.exhausted = True
        else:
            node.exhausted = not _unexpanded(session, node) and all(
                c.exhausted for c in node.children.values()
            )

    refresh(session.root)
    for route, _vec in session.pareto.items():
        _bump_hits(session, route, +1)

    if session.root.exhausted:
        session.status = EXHAUSTED
    elif session.status == EXHAUSTED:
        session.status = PAUSED
    return session
