"""Replan a route interactively: anchored search, live progress, edits.

Builds a station graph between a route's endpoints with one anchored
midpoint, runs the Monte-Carlo search in short bursts while printing the
progress a UI would stream, prunes with criterion ranges, removes a station
mid-search, and runs to exhaustion.

Run:  python3 demos/02_route_replanning.py
"""

import random

from busnet.criteria import CostParams
from busnet.graph import GraphParams, build_anchored_graph
from busnet.network import build_demand_matrix
from busnet.search import RUNNING, SearchParams, create_session, edit_stations, step
from busnet.network import ingest_network
from busnet.synthetic import synth_corpus
import tempfile

print("== setup: a corridor with an anchored midpoint ==")
corpus = synth_corpus(tempfile.mkdtemp(), n_stops=900, n_routes=30, n_trips=25_000, seed=23)
net = ingest_network(corpus / "stops.csv", corpus / "routes.csv", corpus / "trips.csv")
window = net.full_window()
demand = build_demand_matrix(net, window)

# replan the longest workable route through one of its own middle stops;
# corridors in sparse districts may not be bridgeable, so try in order
from busnet.graph import EmptyGraphError

graph = None
for victim in sorted(net.routes.values(), key=lambda r: -len(r.stops)):
    origin, destination = victim.stops[0], victim.stops[-1]
    midpoint = victim.stops[len(victim.stops) // 2]
    try:
        candidate = build_anchored_graph(
            net, [[origin], [midpoint], [destination]], GraphParams(0.35, 1.8, 0.5)
        )
    except (EmptyGraphError, ValueError):
        continue
    if 20 <= candidate.n_nodes <= 300:
        graph = candidate
        break
print(f"   route {victim.route_id}: {origin} -> {midpoint} (anchored) -> {destination}")
print(f"   station graph: {graph.n_nodes} candidate stops, {graph.n_edges} edges")

print("\n== search with live snapshots (k=4) ==")
session = create_session(
    graph,
    demand,
    CostParams(),
    params=SearchParams(k=4),
    ranges={"directness": (None, 2000.0)},
    seed=99,
)
session.resume()
for burst in range(6):
    snap = step(session, 50)
    hist = snap.histograms["passenger_flow"]
    spark = "".join(" .:-=+*#%@"[min(9, h)] for h in hist)
    print(
        f"   iter {snap.iteration:4d}  status={snap.status:9s}  pareto={snap.pareto_count:3d}"
        f"  flow histogram [{spark}]"
    )
    if snap.status != RUNNING:
        break

print("\n== live edit: drop a busy intermediate station ==")
rng = random.Random(5)
candidates = [s for s in graph.nodes if s not in graph.anchors]
target = rng.choice(candidates)
before = len(session.pareto)
session.pause()
edit_stations(session, remove={target})
print(f"   removed {target}: pareto {before} -> {len(session.pareto)} routes "
      f"(routes through it were evicted, survivors re-evaluated)")

session.resume()
snap = step(session, 2000)  # the planner, not the model, decides when to stop
if snap.status == RUNNING:
    session.stop()
print(f"\n== wrap-up ==")
print(f"   status={session.status} after {snap.iteration} iterations, {snap.pareto_count} Pareto routes")
for summary in snap.routes[:5]:
    c = summary.criteria
    print(
        f"   {summary.id}  {len(summary.stops):2d} stops  time={c.service_time:.2f}h  "
        f"flow={c.passenger_flow:.0f}  directness={c.directness:.0f}  service={c.service_cost:.0f}"
    )
if snap.pareto_count > 5:
    print(f"   ... and {snap.pareto_count - 5} more")
