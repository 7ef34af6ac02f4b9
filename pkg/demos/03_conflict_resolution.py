"""Narrow a Pareto set to one route by progressive conflict resolution.

Runs a search to exhaustion, clusters the alternatives, then resolves the
topological conflicts one at a time (always preferring the cluster with the
highest median passenger flow), printing the map markers a UI would draw.
One step is undone and re-decided to show exact history restoration.

Run:  python3 demos/03_conflict_resolution.py
"""

import tempfile

from busnet.criteria import CostParams
from busnet.graph import GraphParams, build_station_graph
from busnet.network import build_demand_matrix, ingest_network
from busnet.resolution import create_resolution_session, marker_states, resolve, undo
from busnet.search import SearchParams, create_session, step
from busnet.synthetic import synth_corpus

print("== generate alternatives ==")
corpus = synth_corpus(tempfile.mkdtemp(), n_stops=700, n_routes=25, n_trips=20_000, seed=37)
net = ingest_network(corpus / "stops.csv", corpus / "routes.csv", corpus / "trips.csv")
demand = build_demand_matrix(net, net.full_window())

from busnet.graph import EmptyGraphError

graph = None
for victim in sorted(net.routes.values(), key=lambda r: -net.route_length_km(r.route_id)):
    try:
        candidate = build_station_graph(
            net, victim.stops[0], victim.stops[-1], GraphParams(0.35, 1.7, 0.5)
        )
    except (EmptyGraphError, ValueError):
        continue
    # small enough to enumerate completely within the demo budget
    if candidate.paths_to_dest[candidate.origin] <= 5000:
        graph = candidate
        break
session = create_session(graph, demand, CostParams(), params=SearchParams(k=4), seed=3)
session.resume()
snap = step(session, 100_000)
print(f"   search {snap.status}: {snap.pareto_count} Pareto-optimal alternatives")

print("\n== cluster into at most four choices ==")
routes = list(session.pareto.routes)
values = dict(session.pareto.routes)
rs = create_resolution_session(routes, values, graph.nodes, beta=4)


def show(state_label):
    print(f"   [{state_label}] {len(rs.candidates)} candidates, "
          f"{len(rs.clusters)} clusters, {len(rs.conflicts)} conflicts")
    for i, cluster in enumerate(rs.clusters):
        stats = dict(cluster.criterion_stats)
        flow_med = stats["passenger_flow"][2]
        text = cluster.pattern_text
        if len(text) > 64:
            text = text[:61] + "..."
        print(f"     c{i}: {len(cluster.members):2d} routes  median flow {flow_med:7.0f}  {text}")
    markers = marker_states(rs)
    counts = {s: 0 for s in ("resolved", "active", "pending")}
    for v in markers.values():
        counts[v] += 1
    print(f"     markers: {counts['resolved']} resolved / {counts['active']} active / {counts['pending']} pending")


show("start")

step_no = 0
while not rs.is_final:
    conflict = rs.conflicts[rs.active_index]
    # prefer the alternative whose cluster has the highest median flow
    def median_flow(ci):
        return dict(rs.clusters[ci].criterion_stats)["passenger_flow"][2]

    best_ci = max((ci for ci, _seg in conflict.alternatives), key=median_flow)
    step_no += 1
    print(f"\n== step {step_no}: conflict between {conflict.position[0]} and {conflict.position[1]} ==")
    for ci, seg in conflict.alternatives:
        mark = "->" if ci == best_ci else "  "
        print(f"   {mark} c{ci} via {('-'.join(seg) or '(direct)')} (median flow {median_flow(ci):.0f})")
    resolve(rs, rs.active_index, best_ci)
    show(f"after step {step_no}")
    if step_no == 1 and rs.history:
        print("\n== second thoughts: undo and redo the same choice ==")
        undo(rs)
        show("after undo")
        resolve(rs, rs.active_index, best_ci)
        show("after redo")

print(f"\n== final choice after {step_no} resolutions ==")
route = rs.final_route
vec = values[route]
print(f"   {'-'.join(route[:8])}{'-...' if len(route) > 8 else ''}")
print(f"   {len(route)} stops, time {vec.service_time:.2f}h, flow {vec.passenger_flow:.0f}, "
      f"service cost {vec.service_cost:.0f}")
