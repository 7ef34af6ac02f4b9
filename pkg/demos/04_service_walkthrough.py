"""Drive the HTTP service end to end: upload, analytics, streamed search,
station edits, and conflict resolution over REST + server-sent events.

Starts a live server on a free port, then acts as a thin client.

Run:  python3 demos/04_service_walkthrough.py
"""

import json
import tempfile
import threading
import time

import httpx
import uvicorn

from busnet.api import ServiceConfig, create_app
from busnet.synthetic import synth_corpus

print("== start the service on a synthetic dataset ==")
corpus = synth_corpus(tempfile.mkdtemp(), n_stops=600, n_routes=20, n_trips=12_000, seed=8)
app = create_app(ServiceConfig(dataset_dir=str(corpus), snapshot_interval=10))
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error"))
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.02)
port = server.servers[0].sockets[0].getsockname()[1]
base = f"http://127.0.0.1:{port}"
client = httpx.Client(base_url=base, timeout=30)
print(f"   {base} -> {client.get('/health').json()}")

print("\n== zones and ranking over REST ==")
zones = client.get("/zones", params={"count": 4}).json()
print(f"   GET /zones?count=4 -> {len(zones['features'])} zone polygons")
ranked = client.get("/routes", params={"weights": "passenger_flow=1,service_cost=0.5"}).json()
worst = ranked["routes"][-1]["route_id"]
print(f"   GET /routes -> {len(ranked['routes'])} ranked routes, weakest: {worst}")
matrix = client.get(f"/routes/{worst}/matrix", params={"bin": "hourly"}).json()
print(f"   GET /routes/{worst}/matrix -> {len(matrix['cells'])} non-empty cells")

print("\n== search session with a streamed progress feed ==")
created = client.post(
    "/search/sessions",
    json={"route_id": worst, "params": {"k": 4, "seed": 42}, "ranges": {"directness": [None, 5000]}},
).json()
sid = created["session_id"]
print(f"   POST /search/sessions -> {sid}")
client.post(f"/search/sessions/{sid}/control", json={"action": "resume"})

events = []
with client.stream("GET", f"/search/sessions/{sid}/stream") as stream:
    for line in stream.iter_lines():
        if line.startswith("data: "):
            snap = json.loads(line[len("data: "):])
            events.append(snap)
            print(f"   SSE iter={snap['iteration']:4d} status={snap['status']:9s} pareto={snap['pareto_count']}")
            if snap["status"] in ("exhausted", "stopped") or len(events) >= 8:
                break

graph = client.get(f"/search/sessions/{sid}/graph").json()
movable = [
    f["properties"]["stop_id"]
    for f in graph["features"]
    if f["geometry"]["type"] == "Point" and not f["properties"]["anchor"]
]
if movable and events[-1]["status"] not in ("exhausted", "stopped"):
    print(f"\n== live station edit: drop {movable[0]} ==")
    client.post(f"/search/sessions/{sid}/stations", json={"remove": [movable[0]]})
client.post(f"/search/sessions/{sid}/control", json={"action": "stop"})

print("\n== resolve the alternatives to one route ==")
final_state = None
resolution = client.post("/resolve/sessions", json={"search_session_id": sid, "beta": 3})
if resolution.status_code != 200:
    print(f"   {resolution.json()['message']}")
else:
    rid = resolution.json()["session_id"]
    state = resolution.json()["state"]
    while not state["final"]:
        active_index = next(i for i, c in enumerate(state["conflicts"]) if c["status"] == "active")
        choice = state["conflicts"][active_index]["alternatives"][0]["cluster"]
        state = client.post(
            f"/resolve/sessions/{rid}/resolve",
            json={"conflict_index": active_index, "cluster_id": choice},
        ).json()
        print(f"   resolved one conflict -> {state['candidate_count']} candidates remain")
    print(f"   final route: {'-'.join(state['final_route'][:8])}"
          f"{'-...' if len(state['final_route']) > 8 else ''}")

server.should_exit = True
print("\ndone")
