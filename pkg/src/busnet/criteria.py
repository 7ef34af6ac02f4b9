"""Route criteria: full-route evaluation and fast subspace estimates.

A route subspace is the set of completions of a prefix. Directness and
construction cost of a subspace are computed with precomputed tables so the
per-call cost during search stays linear in the prefix length; service time
and passenger flow use exact uniform-completion means derived by comparable
reverse-topological recursions. Per-criterion min/max bounds support range
pruning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import StationGraph
from .network import DemandMatrix

CRITERION_NAMES = (
    "service_time",
    "passenger_flow",
    "directness",
    "construction_cost",
    "service_cost",
)
HIGHER_IS_BETTER = frozenset({"passenger_flow"})

DWELL_HOURS = 2.0 / 60.0


class RouteEvaluationError(ValueError):
    """Raised when a stop sequence is not a path of the station graph."""


class UnreachableSubspaceError(ValueError):
    """Raised when a prefix tail has no path to the destination."""


@dataclass(frozen=True)
class CriterionVector:
    service_time: float
    passenger_flow: float
    directness: float
    construction_cost: float
    service_cost: float

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in CRITERION_NAMES}

    def get(self, name: str) -> float:
        return float(getattr(self, name))

    @classmethod
    def from_dict(cls, data: dict) -> "CriterionVector":
        return cls(**{name: float(data[name]) for name in CRITERION_NAMES})


@dataclass(frozen=True)
class CostParams:
    """Operating-cost model parameters (money units are unit-agnostic)."""

    per_stop_cost: float = 50.0
    headway: float = 0.25
    service_span: float = 18.0
    crew_wage: float = 30.0
    fuel_cost: float = 1.2
    maintenance_cost: float = 0.8
    speed: float = 20.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def load_cost_params(path) -> CostParams:
    """Read CostParams from a TOML or JSON file with the canonical field names."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    unknown = set(data) - set(CostParams.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown cost parameter(s): {sorted(unknown)}")
    return CostParams(**data)


def service_cost(service_time_h: float, cost: CostParams) -> float:
    """Cost of scheduling and operating a route with one-way time T.

    (T_s / H) * (2 T C_w + 2 T v (C_b + C_f)): a round trip per headway slot
    over the service span, paying crew wages and per-km running costs.
    """
    if service_time_h <= 0:
        raise ValueError("service time must be positive")
    t = service_time_h
    return (cost.service_span / cost.headway) * (
        2.0 * t * cost.crew_wage + 2.0 * t * cost.speed * (cost.maintenance_cost + cost.fuel_cost)
    )


@dataclass(frozen=True)
class CriterionBounds:
    lo: float
    hi: float

    def overlaps(self, lo: float | None, hi: float | None, tol: float = 0.0) -> bool:
        """Interval overlap; ``tol`` widens this range (relative) so pruning
        decisions stay sound under floating-point summation-order noise."""
        pad = tol * max(1.0, abs(self.lo), abs(self.hi))
        if lo is not None and self.hi + pad < lo:
            return False
        if hi is not None and self.lo - pad > hi:
            return False
        return True


# ---------------------------------------------------------------------------
# precomputed tables
# ---------------------------------------------------------------------------


class DirectnessTables:
    """Suffix-accumulated transit/road ratio tables A(p, q) and B(q).

    A[p, q] sums ratio(p, v) over all stations v at or after q in topological
    order; B[q] sums ratio(u, v) over interior pairs of that suffix. Pairs
    with no transit path (and self pairs) contribute zero. Precomputation is
    O(n^2) via suffix accumulation.
    """

    def __init__(self, graph: StationGraph):
        geo = _geo_tables(graph)
        self.ids = graph.nodes
        self.index = graph.topo_index
        self.A = geo.A
        self.B = geo.B
        self.ratio = geo.ratio

    def a(self, p: str, q: str) -> float:
        return float(self.A[self.index[p], self.index[q]])

    def b(self, q: str) -> float:
        return float(self.B[self.index[q]])


def precompute_directness_tables(graph: StationGraph) -> DirectnessTables:
    return DirectnessTables(graph)


class _GeoTables:
    """Demand/cost-independent dense tables for one station graph."""

    def __init__(self, graph: StationGraph):
        n = graph.n_nodes
        ids = list(graph.nodes)
        self.n = n
        self.index = graph.topo_index
        self.D = graph.network.road_distance_block(ids, ids)

        delta = np.full((n, n), np.inf)
        for i, u in enumerate(ids):
            for v, dv in graph.dist_from(u).items():
                delta[i, graph.topo_index[v]] = dv
        np.fill_diagonal(delta, 0.0)
        self.delta = delta

        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.isfinite(delta) & (self.D > 0), delta / self.D, 0.0)
        np.fill_diagonal(ratio, 0.0)
        self.ratio = ratio

        # A[p, q] = sum_{v >= q} ratio[p, v]; B via the recurrence
        # B[i] = B[i+1] + A[i+1, i+2].
        self.A = np.cumsum(ratio[:, ::-1], axis=1)[:, ::-1]
        self.a_diag = self.A.diagonal().copy()
        B = np.zeros(n)
        for i in range(n - 2, -1, -1):
            B[i] = B[i + 1] + (self.A[i + 1, i + 2] if i + 2 < n else 0.0)
        self.B = B

        # exact mean suffix stop count: h[u] = avg #stops strictly after u
        npaths = np.array([float(graph.paths_to_dest[s]) for s in ids])
        self.npaths = npaths
        succ_idx = [np.array([graph.topo_index[v] for v in graph.successors(s)], dtype=int) for s in ids]
        self.succ_idx = succ_idx
        h = np.zeros(n)
        stops_lo = np.zeros(n)
        stops_hi = np.zeros(n)
        for i in range(n - 2, -1, -1):
            js = succ_idx[i]
            h[i] = float(np.sum(npaths[js] * (h[js] + 1.0)) / npaths[i])
            stops_lo[i] = 1.0 + stops_lo[js].min()
            stops_hi[i] = 1.0 + stops_hi[js].max()
        self.h = h
        self.stops_lo = stops_lo
        self.stops_hi = stops_hi

        self._desc: dict[int, np.ndarray] = {}
        self._graph = graph

    def desc_mask(self, i: int) -> np.ndarray:
        """Boolean mask of nodes reachable from node index i (excluding i)."""
        hit = self._desc.get(i)
        if hit is None:
            mask = np.zeros(self.n, dtype=bool)
            stack = [i]
            while stack:
                j = stack.pop()
                for k in self.succ_idx[j]:
                    if not mask[k]:
                        mask[k] = True
                        stack.append(int(k))
            hit = mask
            self._desc[i] = hit
        return hit


class _CostTables:
    """Speed-dependent suffix tables: exact mean and min/max service time."""

    def __init__(self, graph: StationGraph, geo: _GeoTables, cost: CostParams):
        n = geo.n
        v = cost.speed
        t_mean = np.zeros(n)
        t_lo = np.zeros(n)
        t_hi = np.zeros(n)
        dwell = np.full(n, DWELL_HOURS)
        dwell[n - 1] = 0.0  # no dwell at the destination
        for i in range(n - 2, -1, -1):
            js = geo.succ_idx[i]
            hop = geo.D[i, js] / v + dwell[js]
            t_mean[i] = float(np.sum(geo.npaths[js] * (hop + t_mean[js])) / geo.npaths[i])
            t_lo[i] = float(np.min(hop + t_lo[js]))
            t_hi[i] = float(np.max(hop + t_hi[js]))
        self.t_mean = t_mean
        self.t_lo = t_lo
        self.t_hi = t_hi


class _DemandTables:
    """Demand projections onto the graph nodes plus suffix-mean recursions."""

    def __init__(self, graph: StationGraph, geo: _GeoTables, demand: DemandMatrix):
        n = geo.n
        dmat = np.zeros((n, n))
        idx = graph.topo_index
        for (u, v), c in demand.counts.items():
            iu, iv = idx.get(u), idx.get(v)
            if iu is not None and iv is not None:
                dmat[iu, iv] = c
        self.dmat = dmat

        # g[p, u]: mean over completions from u of the demand from p into the
        # strict suffix; psi[u]: mean of pair demand wholly inside the suffix.
        g = np.zeros((n, n))
        psi = np.zeros(n)
        for i in range(n - 2, -1, -1):
            js = geo.succ_idx[i]
            w = geo.npaths[js] / geo.npaths[i]
            g[:, i] = (dmat[:, js] + g[:, js]) @ w
            psi[i] = float(np.sum(w * (g[js, js] + psi[js])))
        self.g = g
        self.g_diag = g.diagonal().copy()
        self.psi = psi


def _geo_tables(graph: StationGraph) -> _GeoTables:
    hit = graph._cache.get("geo")
    if hit is None:
        hit = _GeoTables(graph)
        graph._cache["geo"] = hit
    return hit


def _cost_tables(graph: StationGraph, cost: CostParams) -> _CostTables:
    hit = graph._cache.get(("cost", cost))
    if hit is None:
        hit = _CostTables(graph, _geo_tables(graph), cost)
        graph._cache[("cost", cost)] = hit
    return hit


def _demand_tables(graph: StationGraph, demand: DemandMatrix) -> _DemandTables:
    key = ("demand", id(demand))
    hit = graph._cache.get(key)
    if hit is None or hit[0] is not demand:
        tables = _DemandTables(graph, _geo_tables(graph), demand)
        graph._cache[key] = (demand, tables)
        return tables
    return hit[1]


class SubspaceTables:
    """Bundle of every per-graph table the search engine consumes."""

    def __init__(self, graph: StationGraph, demand: DemandMatrix, cost: CostParams):
        self.graph = graph
        self.demand = demand
        self.cost = cost
        self.geo = _geo_tables(graph)
        self.cost_t = _cost_tables(graph, cost)
        self.dem = _demand_tables(graph, demand)
        self.index = graph.topo_index
        self.dest_index = graph.n_nodes - 1

    def route_indices(self, route) -> np.ndarray:
        try:
            return np.array([self.index[s] for s in route], dtype=int)
        except KeyError as err:
            raise RouteEvaluationError(f"stop {err.args[0]!r} is not in the graph") from None

    def evaluate(self, route) -> CriterionVector:
        """Exact criteria of a complete stop sequence (a path in the graph)."""
        if len(route) < 2:
            raise RouteEvaluationError("route needs at least two stops")
        idx = self.route_indices(route)
        hops = self.geo.D[idx[:-1], idx[1:]]
        for k in range(len(route) - 1):
            if not self.graph.has_edge(route[k], route[k + 1]):
                raise RouteEvaluationError(f"missing edge {route[k]} -> {route[k + 1]}")
        length = float(hops.sum())
        time = length / self.cost.speed + DWELL_HOURS * (len(route) - 2)
        sub_d = self.dem.dmat[np.ix_(idx, idx)]
        sub_r = self.geo.ratio[np.ix_(idx, idx)]
        iu = np.triu_indices(len(idx), k=1)
        flow = float(sub_d[iu].sum())
        directness = float(sub_r[iu].sum())
        return CriterionVector(
            service_time=time,
            passenger_flow=flow,
            directness=directness,
            construction_cost=len(route) * self.cost.per_stop_cost,
            service_cost=service_cost(time, self.cost),
        )


def evaluate_route(
    route,
    network,
    graph: StationGraph,
    demand: DemandMatrix,
    cost: CostParams,
    tables: SubspaceTables | None = None,
) -> CriterionVector:
    """Evaluate a complete route; see :meth:`SubspaceTables.evaluate`."""
    if tables is None:
        tables = SubspaceTables(graph, demand, cost)
    return tables.evaluate(tuple(route))


# ---------------------------------------------------------------------------
# subspace estimates
# ---------------------------------------------------------------------------


def subspace_directness(prefix, tables: DirectnessTables, graph: StationGraph) -> float:
    """Directness estimate of the subspace of routes extending ``prefix``.

    The suffix estimate (sum_u A(u, tail) + B(tail)) / N_tail,dest covers the
    pairs ending at or after the prefix tail; pairs already decided strictly
    inside the prefix are accumulated exactly, so on a chain graph (and for a
    full-route prefix) the value coincides with the route's pairwise
    directness. Runs in O(len(prefix)) plus the decided-pair accumulation.
    """
    tail = prefix[-1]
    n = graph.paths_to_dest.get(tail, 0)
    if n == 0:
        raise UnreachableSubspaceError(f"{tail} cannot reach the destination")
    estimate = (sum(tables.a(u, tail) for u in prefix) + tables.b(tail)) / n
    idx = [tables.index[s] for s in prefix[:-1]]
    decided = float(sum(tables.ratio[idx[i], idx[j]] for i in range(len(idx)) for j in range(i + 1, len(idx))))
    return decided + estimate


def subspace_construction_cost(graph: StationGraph, prefix, per_stop_cost: float) -> float:
    """Mean construction cost over all completions of ``prefix``.

    len(prefix) * C_s plus the reverse-topological average of the remaining
    stop count times C_s.
    """
    geo = _geo_tables(graph)
    tail = prefix[-1]
    if graph.paths_to_dest.get(tail, 0) == 0:
        raise UnreachableSubspaceError(f"{tail} cannot reach the destination")
    return len(prefix) * per_stop_cost + per_stop_cost * float(geo.h[graph.topo_index[tail]])


def subspace_service_time(graph: StationGraph, prefix, cost: CostParams) -> float:
    """Mean one-way service time over all completions of ``prefix``."""
    geo = _geo_tables(graph)
    ct = _cost_tables(graph, cost)
    idx = [graph.topo_index[s] for s in prefix]
    length = float(sum(geo.D[i, j] for i, j in zip(idx, idx[1:])))
    dwell_count = sum(1 for i in idx[1:] if i != geo.n - 1)
    return length / cost.speed + DWELL_HOURS * dwell_count + float(ct.t_mean[idx[-1]])


def subspace_mean_flow(graph: StationGraph, prefix, demand: DemandMatrix) -> float:
    """Mean passenger flow over all completions of ``prefix``."""
    geo = _geo_tables(graph)
    dem = _demand_tables(graph, demand)
    idx = np.array([graph.topo_index[s] for s in prefix], dtype=int)
    iu = np.triu_indices(len(idx), k=1)
    exact = float(dem.dmat[np.ix_(idx, idx)][iu].sum())
    tail = int(idx[-1])
    cross = float(dem.g[idx, tail].sum())  # includes g[tail, tail]
    return exact + cross + float(dem.psi[tail])


# ---------------------------------------------------------------------------
# pruning bounds
# ---------------------------------------------------------------------------


def criterion_bounds(
    graph: StationGraph,
    station: str,
    prefix,
    criterion: str,
    demand: DemandMatrix | None = None,
    cost: CostParams | None = None,
) -> CriterionBounds:
    """Sound value bounds over completions of ``prefix + [station]``.

    Additive criteria (service time, construction cost) are exact min/max
    suffix DPs. Pairwise criteria (flow, directness) use a guaranteed-route
    lower bound (prefix plus nodes on every completion) and an any-reachable
    upper bound, so every completable route's value lies inside the range.
    """
    if criterion not in CRITERION_NAMES:
        raise ValueError(f"unknown criterion {criterion!r}")
    if prefix and not graph.has_edge(prefix[-1], station):
        raise ValueError(f"{station} is not a successor of {prefix[-1]}")
    cost = cost or CostParams()
    geo = _geo_tables(graph)
    ext = tuple(prefix) + (station,)
    idx = np.array([graph.topo_index[s] for s in ext], dtype=int)
    si = int(idx[-1])
    dest = geo.n - 1

    if criterion in ("service_time", "service_cost"):
        ct = _cost_tables(graph, cost)
        length = float(geo.D[idx[:-1], idx[1:]].sum()) if len(idx) > 1 else 0.0
        dwell_count = sum(1 for i in idx[1:] if i != dest)
        base = length / cost.speed + DWELL_HOURS * dwell_count
        lo, hi = base + float(ct.t_lo[si]), base + float(ct.t_hi[si])
        if criterion == "service_cost":
            return CriterionBounds(service_cost(lo, cost), service_cost(hi, cost))
        return CriterionBounds(lo, hi)

    if criterion == "construction_cost":
        cs = cost.per_stop_cost
        return CriterionBounds(
            cs * (len(ext) + float(geo.stops_lo[si])),
            cs * (len(ext) + float(geo.stops_hi[si])),
        )

    # pairwise criteria
    if criterion == "passenger_flow":
        if demand is None:
            raise ValueError("passenger_flow bounds need a demand matrix")
        mat = _demand_tables(graph, demand).dmat
    else:
        mat = geo.ratio
    return _pairwise_bounds(graph, geo, mat, ext, idx, si)


def _pairwise_bounds(graph, geo, mat, ext, idx, si) -> CriterionBounds:
    iu = np.triu_indices(len(idx), k=1)
    exact = float(mat[np.ix_(idx, idx)][iu].sum())

    # lower bound: prefix plus the stations on every completion from here
    counts_from = graph.paths_from(ext[-1])
    n_tail = graph.paths_to_dest[ext[-1]]
    mandatory = [
        graph.topo_index[w]
        for w, c in counts_from.items()
        if w != ext[-1] and c * graph.paths_to_dest[w] == n_tail
    ]
    mandatory.sort()
    lo_idx = np.concatenate([idx, np.array(mandatory, dtype=int)]) if mandatory else idx
    lo_iu = np.triu_indices(len(lo_idx), k=1)
    lo = float(mat[np.ix_(lo_idx, lo_idx)][lo_iu].sum())

    # upper bound: everything reachable could be visited
    fmask = geo.desc_mask(si).copy()
    f_idx = np.nonzero(fmask)[0]
    hi = exact + float(mat[np.ix_(idx, f_idx)].sum()) if len(f_idx) else exact
    for w1 in f_idx:
        reach = geo.desc_mask(int(w1)) & fmask
        if reach.any():
            hi += float(mat[w1, reach].sum())
    return CriterionBounds(lo, hi)
