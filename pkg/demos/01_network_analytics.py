"""Explore a synthetic bus network: zones, route ranking, flow matrices.

Generates a small city, ingests it, and walks the network -> route -> stop
levels of analysis the way a planner hunting for deficient routes would.

Run:  python3 demos/01_network_analytics.py
"""

import tempfile

from busnet.analytics import compute_zones, detect_transfers, flow_matrix, rank_routes, transfer_shares, zone_statistics
from busnet.criteria import CostParams
from busnet.network import ingest_network
from busnet.synthetic import synth_corpus

print("== 1. synthesize and ingest a city ==")
corpus = synth_corpus(tempfile.mkdtemp(), n_stops=1500, n_routes=60, n_trips=40_000, seed=11)
net = ingest_network(corpus / "stops.csv", corpus / "routes.csv", corpus / "trips.csv")
print(f"   {len(net.stops)} stops, {len(net.routes)} routes, {len(net.trips)} trips "
      f"(dropped: {net.report.dropped_trips})")

window = net.full_window()
cost = CostParams()

print("\n== 2. network level: transportation zones ==")
partition = compute_zones(net, 6)
stats = zone_statistics(partition, net, window, cost)
print("   zone  stops  routes_len_avg  volume  load   directness  outflow_peak")
for zone in partition.zones:
    st = stats[zone.zone_id]
    peak = max(range(16), key=lambda i: st.outflow_by_bearing[i])
    print(
        f"   {zone.zone_id}  {len(zone.stop_ids):5d}  {st.route_length_avg:13.1f}"
        f"  {st.passenger_volume:6.0f}  {st.average_load:5.2f}  {st.directness_avg:10.1f}"
        f"  sector {peak:2d} ({st.outflow_by_bearing[peak]} trips)"
    )

print("\n== 3. route level: weighted ranking with filters ==")
rows = rank_routes(
    net,
    weights={"passenger_flow": 1.0, "service_cost": 1.0},
    filters={"passenger_flow": (50, None), "stop_count": (8, None)},
    window=window,
    cost=cost,
)
print(f"   {len(rows)} routes pass the filters; five weakest by combined score:")
for rid, vec, score in rows[-5:]:
    print(
        f"   {rid}: score={score:.3f} flow={vec.passenger_flow:.0f} "
        f"time={vec.service_time:.2f}h cost={vec.service_cost:.0f}"
    )

worst = rows[-1][0]
print(f"\n== 4. stop level: flow matrix of the weakest route {worst} ==")
matrix = flow_matrix(net, worst, window, intensity_threshold=20)
stops = matrix.stops
print(f"   {len(stops)} stops, {matrix.total} trips in window")
print("   hottest cells:")
hot = sorted(matrix.cells.items(), key=lambda kv: -kv[1])[:5]
for (i, j), count in hot:
    print(f"   {stops[i]} -> {stops[j]}: {count} passengers (intensity {matrix.intensity(i, j):.2f})")
peak_hour = max(range(24), key=lambda h: sum(v[h] for v in matrix.checkins_hourly.values()))
print(f"   check-ins peak at {peak_hour:02d}:00")

print("\n== 5. transfers ==")
links = detect_transfers(net)
print(f"   {len(links)} same-card transfers across the network")
badged = sorted(matrix.transfer_in, key=lambda s: -sum(matrix.transfer_in[s].values()))[:1]
if badged:
    pie = transfer_shares(matrix, badged[0])
    print(f"   busiest transfer stop on {worst}: {pie['stop']} with {pie['total']} transfers")
    for share in pie["shares"][:4]:
        print(f"     {share['direction']:>3} {share['route']}: {share['count']} ({share['share']:.0%})")
else:
    print(f"   route {worst} sees no transfers in this window")
