"""Progressive conflict resolution over generated route alternatives.

Candidate routes are grouped into at most beta clusters by iteratively
merging the pairs that share the most stops (choosing the merge whose member
routes have the most homogeneous weighted criteria), conflicts are detected
where the aligned clusters diverge, and the user resolves one conflict at a
time until a single route remains. Every resolve step can be undone exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .criteria import CRITERION_NAMES, HIGHER_IS_BETTER, CriterionVector

WILDCARD = "*"

RESOLVED = "resolved"
ACTIVE = "active"
PENDING = "pending"


class AlignmentError(ValueError):
    """Raised when clusters cannot be aligned on shared stops."""


class ResolutionStateError(RuntimeError):
    """Raised for resolves against non-active conflicts or empty history."""


@dataclass(frozen=True)
class RouteCluster:
    pattern: tuple[str, ...]
    core: frozenset[str]
    members: tuple[tuple[str, ...], ...]
    criterion_stats: tuple[tuple[str, tuple[float, float, float, float, float]], ...]

    @property
    def pattern_text(self) -> str:
        return "-".join(self.pattern)

    def stats_dict(self) -> dict:
        return {name: list(vals) for name, vals in self.criterion_stats}


@dataclass(frozen=True)
class Conflict:
    position: tuple[str, str]
    alternatives: tuple[tuple[int, tuple[str, ...]], ...]  # (cluster index, segment)
    status: str = PENDING


def _weighted_sums(routes, values, weights, norm_bounds):
    """Weighted sum of oriented normalized criteria per route."""
    sums = {}
    for r in routes:
        vec = values[r]
        total = 0.0
        for name, w in weights.items():
            lo, hi = norm_bounds[name]
            v = vec.get(name)
            if hi > lo:
                norm = (v - lo) / (hi - lo)
            else:
                norm = 0.5
            if name not in HIGHER_IS_BETTER:
                norm = 1.0 - norm
            total += w * norm
        sums[r] = total
    return sums


def normalization_bounds(routes, values) -> dict[str, tuple[float, float]]:
    out = {}
    for name in CRITERION_NAMES:
        vals = [values[r].get(name) for r in routes]
        out[name] = (min(vals), max(vals))
    return out


def cluster_routes(
    routes,
    values: dict[tuple[str, ...], CriterionVector],
    weights: dict[str, float] | None = None,
    beta: int = 4,
    norm_bounds: dict[str, tuple[float, float]] | None = None,
) -> list[RouteCluster]:
    """Merge routes into at most ``beta`` clusters by shared-stop cores.

    Seeds one cluster per route, then repeatedly: find the cluster pairs
    sharing the most stops; among their intersections that leave at least one
    non-superset cluster (so merging never collapses the choice set to one),
    take the one minimising the standard deviation of the member routes'
    weighted normalized criterion sums; replace all superset clusters with
    it. Stops when no legal merge exists or the cluster count reaches beta.
    """
    routes = [tuple(r) for r in routes]
    if not routes:
        raise ValueError("need at least one route")
    if beta < 2:
        raise ValueError("beta must be at least 2")
    weights = dict(weights) if weights else {name: 1.0 for name in CRITERION_NAMES}
    if norm_bounds is None:
        norm_bounds = normalization_bounds(routes, values)
    sums = _weighted_sums(routes, values, weights, norm_bounds)

    route_sets = {r: frozenset(r) for r in routes}
    G: list[frozenset[str]] = [route_sets[r] for r in routes]

    while len(G) > beta:
        best = -1
        pairs = []
        for i in range(len(G)):
            for j in range(i + 1, len(G)):
                size = len(G[i] & G[j])
                if size > best:
                    best = size
                    pairs = [(i, j)]
                elif size == best:
                    pairs.append((i, j))
        candidates = set()
        for i, j in pairs:
            inter = G[i] & G[j]
            if any(not inter.issubset(g) for g in G):
                candidates.add(inter)
        candidates = [
            c for c in candidates if any(c.issubset(route_sets[r]) for r in routes)
        ]
        if not candidates:
            break

        def sigma(core: frozenset[str]) -> float:
            matched = [sums[r] for r in routes if core.issubset(route_sets[r])]
            return float(np.std(matched))

        g_m = min(candidates, key=lambda c: (sigma(c), tuple(sorted(c))))
        G = [g for g in G if not g_m.issubset(g)] + [g_m]
        assert len(G) >= 2, "a merge may never reduce the choices to one"

    return _build_clusters(G, routes, route_sets, values)


def _build_clusters(G, routes, route_sets, values) -> list[RouteCluster]:
    # attribute each route to its most specific matching core
    members: dict[frozenset, list] = {core: [] for core in G}
    for r in routes:
        matching = [core for core in G if core.issubset(route_sets[r])]
        if not matching:
            continue
        best = max(matching, key=lambda c: (len(c), tuple(sorted(c))))
        members[best].append(r)

    clusters = []
    for core, routes_in in members.items():
        if not routes_in:
            continue  # exotic overlap: every matcher was claimed by a larger core
        pattern = _derive_pattern(core, routes_in)
        stats = _criterion_stats(routes_in, values)
        clusters.append(
            RouteCluster(pattern, core, tuple(sorted(routes_in)), stats)
        )
    clusters.sort(key=lambda c: c.pattern)
    return clusters


def _derive_pattern(core, members) -> tuple[str, ...]:
    """Core stops in route order with concrete or wildcard interstitials."""
    first = members[0]
    ordered = sorted(core, key=first.index)
    pattern: list[str] = []
    for k, stop in enumerate(ordered):
        pattern.append(stop)
        if k == len(ordered) - 1:
            break
        nxt = ordered[k + 1]
        segments = set()
        for r in members:
            i, j = r.index(stop), r.index(nxt)
            segments.add(r[i + 1 : j])
        if len(segments) == 1:
            pattern.extend(segments.pop())
        else:
            pattern.append(WILDCARD)
    return tuple(pattern)


def _criterion_stats(members, values):
    out = []
    for name in CRITERION_NAMES:
        vals = [values[r].get(name) for r in members]
        q = np.percentile(vals, [0, 25, 50, 75, 100])
        out.append((name, tuple(float(x) for x in q)))
    return tuple(out)


def detect_conflicts(clusters: list[RouteCluster], stop_order) -> list[Conflict]:
    """Align the clusters on their common stops and report every gap where at
    least two distinct alternatives appear. The first conflict is active."""
    if not clusters:
        raise ValueError("need at least one cluster")
    shared = frozenset.intersection(*(c.core for c in clusters))
    if not shared:
        raise AlignmentError("clusters share no stops and cannot be aligned")
    order_index = {s: i for i, s in enumerate(stop_order)}
    missing = [s for s in shared if s not in order_index]
    if missing:
        raise AlignmentError(f"shared stops missing from stop order: {sorted(missing)}")
    ordered = sorted(shared, key=order_index.__getitem__)

    conflicts = []
    for a, b in zip(ordered, ordered[1:]):
        alternatives = []
        for ci, cluster in enumerate(clusters):
            i, j = cluster.pattern.index(a), cluster.pattern.index(b)
            alternatives.append((ci, cluster.pattern[i + 1 : j]))
        if len({seg for _ci, seg in alternatives}) >= 2:
            conflicts.append(Conflict((a, b), tuple(alternatives)))
    return [
        replace(c, status=ACTIVE if i == 0 else PENDING) for i, c in enumerate(conflicts)
    ]


class ResolutionSession:
    """Single-writer state machine for one progressive decision process."""

    def __init__(self, routes, values, stop_order, weights=None, beta=4):
        routes = sorted(tuple(r) for r in routes)
        if not routes:
            raise ValueError("need at least one candidate route")
        self.values = {tuple(r): values[tuple(r)] for r in routes}
        self.stop_order = tuple(stop_order)
        self.weights = dict(weights) if weights else {name: 1.0 for name in CRITERION_NAMES}
        self.beta = beta
        # normalization is frozen at session start so merge decisions stay
        # stable while candidates shrink
        self.norm_bounds = normalization_bounds(routes, self.values)
        self.candidates: list[tuple[str, ...]] = list(routes)
        self.history: list[tuple] = []
        self.clusters: list[RouteCluster] = []
        self.conflicts: list[Conflict] = []
        self.active_index = 0
        self._recluster()

    # -- state -----------------------------------------------------------

    @property
    def is_final(self) -> bool:
        return len(self.candidates) == 1

    @property
    def final_route(self):
        return self.candidates[0] if self.is_final else None

    def _recluster(self):
        self.clusters = cluster_routes(
            self.candidates, self.values, self.weights, self.beta, self.norm_bounds
        )
        if len(self.candidates) == 1:
            self.conflicts = []
        else:
            self.conflicts = detect_conflicts(self.clusters, self.stop_order)
        self.active_index = 0

    def activate_conflict(self, index: int):
        if not (0 <= index < len(self.conflicts)):
            raise ValueError(f"conflict index {index} out of range")
        self.active_index = index
        self.conflicts = [
            replace(c, status=ACTIVE if i == index else PENDING)
            for i, c in enumerate(self.conflicts)
        ]

    def snapshot(self):
        return (
            tuple(self.candidates),
            tuple(self.clusters),
            tuple(self.conflicts),
            self.active_index,
        )

    def _restore(self, snap):
        candidates, clusters, conflicts, active = snap
        self.candidates = list(candidates)
        self.clusters = list(clusters)
        self.conflicts = list(conflicts)
        self.active_index = active

    def to_dict(self) -> dict:
        markers = marker_states(self)
        return {
            "final": self.is_final,
            "final_route": list(self.final_route) if self.is_final else None,
            "beta": self.beta,
            "candidate_count": len(self.candidates),
            "candidates": [list(r) for r in self.candidates],
            "clusters": [
                {
                    "id": f"c{i}",
                    "pattern": list(c.pattern),
                    "pattern_text": c.pattern_text,
                    "core": sorted(c.core),
                    "members": [list(m) for m in c.members],
                    "stats": c.stats_dict(),
                }
                for i, c in enumerate(self.clusters)
            ],
            "conflicts": [
                {
                    "position": list(c.position),
                    "status": c.status,
                    "alternatives": [
                        {"cluster": f"c{ci}", "segment": list(seg)}
                        for ci, seg in c.alternatives
                    ],
                }
                for c in self.conflicts
            ],
            "markers": markers,
            "history_depth": len(self.history),
        }


def create_resolution_session(routes, values, stop_order, weights=None, beta=4) -> ResolutionSession:
    return ResolutionSession(routes, values, stop_order, weights, beta)


def resolve(session: ResolutionSession, conflict, chosen_cluster) -> ResolutionSession:
    """Keep only the chosen cluster's routes, recluster, and re-detect
    conflicts. The prior state is pushed for undo.

    Filtering keeps the cluster's attributed members (each of which matches
    its core). Keeping every core-matching route instead would let routes
    attributed to other clusters survive, so choosing a single-member
    cluster would not finalize and candidate sets would not strictly
    shrink.
    """
    if session.is_final:
        raise ResolutionStateError("session is already final")
    if not session.conflicts:
        raise ResolutionStateError("no conflicts to resolve")
    if isinstance(conflict, int):
        conflict_index = conflict
        if not (0 <= conflict_index < len(session.conflicts)):
            raise ValueError(f"conflict index {conflict_index} out of range")
        conflict = session.conflicts[conflict_index]
    else:
        conflict_index = session.conflicts.index(conflict)
    if conflict_index != session.active_index:
        raise ResolutionStateError("only the active conflict can be resolved")

    if isinstance(chosen_cluster, int):
        chosen = session.clusters[chosen_cluster]
        chosen_index = chosen_cluster
    else:
        chosen = chosen_cluster
        chosen_index = session.clusters.index(chosen_cluster)
    if chosen_index not in {ci for ci, _ in conflict.alternatives}:
        raise ValueError("chosen cluster is not an alternative of this conflict")

    session.history.append(session.snapshot())
    keep = set(chosen.members)
    session.candidates = [r for r in session.candidates if r in keep]
    session._recluster()
    return session


def undo(session: ResolutionSession) -> ResolutionSession:
    """Exactly restore the state preceding the last resolve."""
    if not session.history:
        raise ResolutionStateError("nothing to undo")
    session._restore(session.history.pop())
    return session


def marker_states(session: ResolutionSession) -> dict[str, str]:
    """Classify every stop appearing in a live cluster pattern.

    resolved: shared by all remaining candidate routes; active: part of the
    conflict currently under examination; pending: waiting in a later
    conflict.
    """
    live: set[str] = set()
    for cluster in session.clusters:
        live.update(s for s in cluster.pattern if s != WILDCARD)
    shared_all = set.intersection(*(set(r) for r in session.candidates)) if session.candidates else set()
    active_stops: set[str] = set()
    if session.conflicts:
        active = session.conflicts[session.active_index]
        for _ci, seg in active.alternatives:
            active_stops.update(s for s in seg if s != WILDCARD)
    out = {}
    for s in sorted(live):
        if s in shared_all:
            out[s] = RESOLVED
        elif s in active_stops:
            out[s] = ACTIVE
        else:
            out[s] = PENDING
    return out
