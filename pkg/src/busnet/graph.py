"""Directed acyclic station graphs between anchored stop sets.

A station graph holds the candidate stops and feasible transitions between an
origin and a destination. Edges obey a spacing band plus a monotone-progress
rule, which makes every edge strictly reduce the road distance to the local
target and hence guarantees acyclicity. Graphs are immutable; edits return a
new graph that is structurally identical to a full rebuild.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import BusNetwork

_BLOCK_ROWS = 2048


class EmptyGraphError(RuntimeError):
    """No feasible origin->destination path; carries build diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConstraintError(ValueError):
    """Raised when an edit touches the origin, destination, or an anchor."""


@dataclass(frozen=True)
class GraphParams:
    """Feasibility rule for station-graph edges.

    An edge u->v exists when min_spacing <= road(u, v) <= max_spacing and
    road(v, target) <= road(u, target) - min_spacing * (1 - progress_slack).
    The slack must stay below 1 so that progress is strictly positive.
    """

    min_spacing_km: float = 0.3
    max_spacing_km: float = 2.0
    progress_slack: float = 0.5

    def __post_init__(self):
        if not (0 < self.min_spacing_km < self.max_spacing_km):
            raise ValueError("require 0 < min_spacing_km < max_spacing_km")
        if not (0 <= self.progress_slack < 1):
            raise ValueError("progress_slack must lie in [0, 1)")

    @property
    def progress_km(self) -> float:
        return self.min_spacing_km * (1.0 - self.progress_slack)


class StationGraph:
    """Immutable DAG of stops with topological order and path counts.

    ``nodes`` is stored in topological order (origin first, destination
    last); ``topo_index`` maps stop ids to their position. Path counts and
    in-graph shortest distances are exposed through :meth:`paths_between`
    and :meth:`transit_distance`, with per-source memoization.
    """

    def __init__(
        self,
        network: BusNetwork,
        params: GraphParams,
        stop_sets: tuple[tuple[str, ...], ...],
        nodes: tuple[str, ...],
        edge_km: dict[tuple[str, str], float],
        excluded_stops: frozenset[str],
    ):
        self.network = network
        self.params = params
        self.stop_sets = stop_sets
        self.excluded_stops = excluded_stops
        self.nodes = nodes
        self.topo_index = {s: i for i, s in enumerate(nodes)}
        self.edge_km = dict(edge_km)
        self.origin = stop_sets[0][0]
        self.destination = stop_sets[-1][-1]
        self.anchors = tuple(s for group in stop_sets for s in group)

        succ: dict[str, list[str]] = {s: [] for s in nodes}
        pred: dict[str, list[str]] = {s: [] for s in nodes}
        for (u, v) in edge_km:
            succ[u].append(v)
            pred[v].append(u)
        self._succ = {u: tuple(sorted(vs, key=self.topo_index.__getitem__)) for u, vs in succ.items()}
        self._pred = {v: tuple(sorted(us, key=self.topo_index.__getitem__)) for v, us in pred.items()}

        self.paths_to_dest: dict[str, int] = {self.destination: 1}
        for s in reversed(nodes[:-1]):
            self.paths_to_dest[s] = sum(self.paths_to_dest[v] for v in self._succ[s])

        self._paths_from: dict[str, dict[str, int]] = {}
        self._dist_from: dict[str, dict[str, float]] = {}
        self._cache: dict = {}  # derived criteria tables, keyed by their builders

    # -- structure -----------------------------------------------------------

    def successors(self, stop: str) -> tuple[str, ...]:
        return self._succ[stop]

    def predecessors(self, stop: str) -> tuple[str, ...]:
        return self._pred[stop]

    def has_edge(self, u: str, v: str) -> bool:
        return (u, v) in self.edge_km

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edge_km)

    def signature(self):
        """Nodes, edges and path counts; equal signatures mean equal graphs."""
        return (self.nodes, tuple(sorted(self.edge_km.items())), tuple(sorted(self.paths_to_dest.items())))

    # -- path counts and distances -------------------------------------------

    def paths_from(self, u: str) -> dict[str, int]:
        """Exact path counts from u to every reachable node (memoized)."""
        hit = self._paths_from.get(u)
        if hit is None:
            counts = {u: 1}
            for w in self.nodes[self.topo_index[u]:]:
                c = counts.get(w)
                if c is None:
                    continue
                for x in self._succ[w]:
                    counts[x] = counts.get(x, 0) + c
            hit = counts
            self._paths_from[u] = hit
        return hit

    def paths_between(self, u: str, v: str) -> int:
        return self.paths_from(u).get(v, 0)

    def dist_from(self, u: str) -> dict[str, float]:
        """Shortest in-graph distance from u to every reachable node (km)."""
        hit = self._dist_from.get(u)
        if hit is None:
            dist = {u: 0.0}
            for w in self.nodes[self.topo_index[u]:]:
                dw = dist.get(w)
                if dw is None:
                    continue
                for x in self._succ[w]:
                    nd = dw + self.edge_km[(w, x)]
                    if nd < dist.get(x, math.inf):
                        dist[x] = nd
            hit = dist
            self._dist_from[u] = hit
        return hit

    def transit_distance(self, u: str, v: str) -> float:
        return self.dist_from(u).get(v, math.inf)

    # -- exports ---------------------------------------------------------------

    def to_geojson(self) -> dict:
        anchor_set = set(self.anchors)
        features = []
        for s in self.nodes:
            stop = self.network.stops[s]
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [stop.lon, stop.lat]},
                    "properties": {
                        "stop_id": s,
                        "topo_index": self.topo_index[s],
                        "anchor": s in anchor_set,
                    },
                }
            )
        for (u, v), km in sorted(self.edge_km.items()):
            a, b = self.network.stops[u], self.network.stops[v]
            features.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "LineString",
                        "coordinates": [[a.lon, a.lat], [b.lon, b.lat]],
                    },
                    "properties": {"from": u, "to": v, "km": km},
                }
            )
        return {"type": "FeatureCollection", "features": features}


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def build_station_graph(
    network: BusNetwork, origin: str, destination: str, params: GraphParams | None = None
) -> StationGraph:
    """Station graph between a single origin and destination stop."""
    if origin == destination:
        raise ValueError("origin and destination must differ")
    return build_anchored_graph(network, [[origin], [destination]], params)


def build_anchored_graph(
    network: BusNetwork,
    stop_sets,
    params: GraphParams | None = None,
    excluded_stops: frozenset[str] = frozenset(),
) -> StationGraph:
    """Station graph forced through ordered stop sets.

    Stops inside each set are chained sequentially; a feasible subgraph is
    built between the last stop of one set and the first stop of the next.
    Every origin->destination path therefore visits all anchored stops in
    the given order.
    """
    params = params or GraphParams()
    sets = tuple(tuple(group) for group in stop_sets)
    if len(sets) < 2:
        raise ValueError("need at least two stop sets")
    if any(not group for group in sets):
        raise ValueError("stop sets must be non-empty")
    anchors = [s for group in sets for s in group]
    if len(set(anchors)) != len(anchors):
        raise ValueError("anchored stops must be distinct")
    for s in anchors:
        if s not in network.stops:
            raise ValueError(f"unknown stop {s!r}")
    if set(anchors) & excluded_stops:
        raise ConstraintError("anchored stops cannot be excluded")

    edge_km: dict[tuple[str, str], float] = {}
    for group in sets:
        for a, b in zip(group, group[1:]):
            edge_km[(a, b)] = network.road_distance(a, b)

    used = set(anchors) | set(excluded_stops)
    ordered_nodes: list[str] = []
    for i, group in enumerate(sets):
        ordered_nodes.extend(group)
        if i == len(sets) - 1:
            break
        p, q = group[-1], sets[i + 1][0]
        interior, seg_edges = _segment(network, p, q, params, frozenset(used))
        used.update(interior)
        edge_km.update(seg_edges)
        ordered_nodes.extend(interior)

    nodes, edge_km = _prune_to_paths(ordered_nodes, edge_km, sets[0][0], sets[-1][-1])
    if nodes is None:
        raise EmptyGraphError(
            f"no feasible path from {sets[0][0]} to {sets[-1][-1]}",
            {"origin": sets[0][0], "destination": sets[-1][-1]},
        )
    return StationGraph(network, params, sets, nodes, edge_km, frozenset(excluded_stops))


def _segment(network, p, q, params, excluded):
    """Feasible interior stops and edges between p and q.

    Interior nodes are returned already sorted into a valid topological
    order: descending road distance to q, ties by stop id.
    """
    d_pq = network.road_distance(p, q)
    candidates = [
        s
        for s in network.stops
        if s not in excluded and s != p and s != q and network.road_distance(s, q) <= d_pq
    ]
    candidates.sort()
    ids = [p] + candidates + [q]
    d_to_q = np.array([network.road_distance(s, q) for s in ids])
    thr = params.progress_km

    edges: dict[tuple[str, str], float] = {}
    succ = [[] for _ in ids]
    pred = [[] for _ in ids]
    for lo in range(0, len(ids), _BLOCK_ROWS):
        hi = min(lo + _BLOCK_ROWS, len(ids))
        block = network.road_distance_block(ids[lo:hi], ids)
        ok = (block >= params.min_spacing_km) & (block <= params.max_spacing_km)
        ok &= d_to_q[None, :] <= (d_to_q[lo:hi, None] - thr)
        for bi, bj in zip(*np.nonzero(ok)):
            i = lo + int(bi)
            j = int(bj)
            succ[i].append(j)
            pred[j].append(i)
            edges[(ids[i], ids[j])] = float(block[bi, bj])

    # keep only nodes on some p -> q path
    fwd = _reach(succ, 0)
    bwd = _reach(pred, len(ids) - 1)
    if len(ids) - 1 not in fwd:
        raise EmptyGraphError(
            f"anchor gap {p} -> {q} is not bridgeable under the current parameters",
            {"gap": (p, q), "candidates": len(candidates)},
        )
    keep = fwd & bwd
    interior = [ids[i] for i in sorted(keep - {0, len(ids) - 1})]
    interior.sort(key=lambda s: (-network.road_distance(s, q), s))
    kept_edges = {
        (u, v): km
        for (u, v), km in edges.items()
        if u in {ids[i] for i in keep} and v in {ids[i] for i in keep}
    }
    return interior, kept_edges


def _reach(adj: list[list[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return seen


def _prune_to_paths(ordered_nodes, edge_km, origin, destination):
    succ: dict[str, list[str]] = {s: [] for s in ordered_nodes}
    pred: dict[str, list[str]] = {s: [] for s in ordered_nodes}
    for (u, v) in edge_km:
        succ[u].append(v)
        pred[v].append(u)

    def reach(adj, start):
        seen = {start}
        stack = [start]
        while stack:
            s = stack.pop()
            for t in adj[s]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return seen

    fwd = reach(succ, origin)
    if destination not in fwd:
        return None, None
    keep = fwd & reach(pred, destination)
    nodes = tuple(s for s in ordered_nodes if s in keep)
    kept = {e: km for e, km in edge_km.items() if e[0] in keep and e[1] in keep}
    return nodes, kept


def edit_graph(graph: StationGraph, add_stops=(), remove_stops=()) -> StationGraph:
    """Apply stop additions/removals; equivalent to a rebuild from scratch."""
    add = set(add_stops)
    remove = set(remove_stops)
    protected = set(graph.anchors)
    if remove & protected:
        raise ConstraintError(f"cannot remove anchored stops: {sorted(remove & protected)}")
    for s in add | remove:
        if s not in graph.network.stops:
            raise ValueError(f"unknown stop {s!r}")
    excluded = frozenset((graph.excluded_stops | remove) - add)
    return build_anchored_graph(graph.network, graph.stop_sets, graph.params, excluded)


def count_paths(graph: StationGraph):
    """Exact path counts by reverse-topological dynamic programming.

    Returns ``(paths_to_dest, paths_between)`` where the second map holds
    every ordered pair with at least one connecting path (including the
    trivial (u, u) -> 1).
    """
    between: dict[tuple[str, str], int] = {}
    for u in graph.nodes:
        for v, n in graph.paths_from(u).items():
            between[(u, v)] = n
    return dict(graph.paths_to_dest), between
