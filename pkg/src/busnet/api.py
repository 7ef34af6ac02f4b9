"""Long-running HTTP service: ingestion, analytics, live search, resolution.

Search sessions each own a worker thread honouring the engine's
single-writer contract; control commands are queued and applied between
cycles, and every subscriber receives snapshots over a server-sent-event
stream. Analytics endpoints are read-only over the immutable datasets.
"""

from __future__ import annotations

import io
import itertools
import json
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse, StreamingResponse

from .analytics import (
    compute_zones,
    flow_matrix,
    rank_routes,
    transfer_shares,
    zone_statistics,
)
from .criteria import CostParams
from .graph import ConstraintError, EmptyGraphError, GraphParams, build_anchored_graph
from .network import BusNetwork, build_demand_matrix, ingest_network
from .parsing import parse_bounds, parse_weights, parse_window, ranges_from_json
from .resolution import (
    ResolutionStateError,
    create_resolution_session,
    resolve as resolve_conflict,
    undo as undo_resolve,
)
from .search import (
    EXHAUSTED,
    RUNNING,
    STOPPED,
    SearchParams,
    SessionStateError,
    create_session,
    edit_stations,
    step,
)

IDLE_EVICTION_S = 30 * 60


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    dataset_dir: str | None = None
    cost: CostParams = field(default_factory=CostParams)
    graph_params: GraphParams = field(default_factory=GraphParams)
    max_sessions: int = 8
    snapshot_interval: int = 25

    def __post_init__(self):
        if self.snapshot_interval < 1:
            raise ValueError("snapshot interval must be >= 1")
        if self.max_sessions < 1:
            raise ValueError("max sessions must be >= 1")


def _sse(seq: int, payload: dict) -> str:
    return f"id: {seq}\ndata: {json.dumps(payload, sort_keys=True)}\n\n"


class SearchRuntime:
    """One search session, its worker thread, and its SSE subscribers."""

    def __init__(self, sid: str, session, interval: int):
        self.id = sid
        self.session = session
        self.interval = interval
        self.commands: queue.Queue = queue.Queue()
        self.wake = threading.Event()
        self.state_lock = threading.Lock()
        self.sub_lock = threading.Lock()
        self.subscribers: list[queue.Queue] = []
        self.seq = 0
        self.last_event = (0, session.snapshot().to_wire())
        self.closed = False
        self.last_activity = time.time()
        self.thread = threading.Thread(target=self._run, name=f"search-{sid}", daemon=True)
        self.thread.start()

    # -- worker ---------------------------------------------------------

    def _run(self):
        while True:
            changed = self._apply_commands()
            with self.state_lock:
                status = self.session.status
            if changed:
                self._broadcast()
            if status == RUNNING:
                with self.state_lock:
                    step(self.session, self.interval)
                self._broadcast()
            elif status in (EXHAUSTED, STOPPED):
                self._close()
                return
            else:
                self.wake.wait(timeout=0.25)
                self.wake.clear()

    def _apply_commands(self) -> bool:
        changed = False
        while True:
            try:
                kind, payload = self.commands.get_nowait()
            except queue.Empty:
                return changed
            with self.state_lock:
                try:
                    if kind == "pause":
                        self.session.pause()
                    elif kind == "resume":
                        self.session.resume()
                    elif kind == "stop":
                        self.session.stop()
                    elif kind == "edit":
                        edit_stations(self.session, payload["add"], payload["remove"])
                except (SessionStateError, ConstraintError, EmptyGraphError, ValueError):
                    continue  # commands were validated at the endpoint; races are dropped
                changed = True

    def _broadcast(self):
        with self.state_lock:
            wire = self.session.snapshot().to_wire()
        with self.sub_lock:
            self.seq += 1
            self.last_event = (self.seq, wire)
            for q in self.subscribers:
                q.put(self.last_event)

    def _close(self):
        self._broadcast()
        with self.sub_lock:
            self.closed = True
            for q in self.subscribers:
                q.put(None)

    # -- client side -----------------------------------------------------

    def submit(self, kind: str, payload: dict | None = None):
        self.last_activity = time.time()
        self.commands.put((kind, payload or {}))
        self.wake.set()

    def stream(self):
        self.last_activity = time.time()
        q: queue.Queue = queue.Queue()
        with self.sub_lock:
            self.subscribers.append(q)
            seq, wire = self.last_event
            closed = self.closed
        sent = 0
        if seq:
            yield _sse(seq, wire)
            sent = seq
        else:
            # session has not produced any event yet: emit the initial state
            yield _sse(0, wire)
        if closed:
            with self.sub_lock:
                self.subscribers.remove(q)
            return
        try:
            while True:
                try:
                    item = q.get(timeout=0.5)
                except queue.Empty:
                    yield ": keep-alive\n\n"
                    continue
                if item is None:
                    return
                seq, wire = item
                if seq <= sent:
                    continue
                sent = seq
                yield _sse(seq, wire)
        finally:
            with self.sub_lock:
                if q in self.subscribers:
                    self.subscribers.remove(q)


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="busnet", version="0.1.0")
    state = app.state
    state.config = config
    state.datasets: dict[str, BusNetwork] = {}
    state.search: dict[str, SearchRuntime] = {}
    state.resolution: dict[str, dict] = {}
    state.counter = itertools.count(1)
    state.lock = threading.Lock()

    if config.dataset_dir is not None:
        root = Path(config.dataset_dir)
        stops = root / "stops.csv"
        if not root.is_dir() or not stops.exists():
            raise FileNotFoundError(f"dataset directory {root} is missing stops.csv")
        road = root / "road_distances.csv"
        state.datasets["default"] = ingest_network(
            stops, root / "routes.csv", root / "trips.csv", road if road.exists() else None
        )

    # -- error shape -------------------------------------------------------

    def error(code: str, message: str, status: int) -> JSONResponse:
        return JSONResponse({"code": code, "message": message}, status_code=status)

    @app.exception_handler(KeyError)
    async def _key_error(request: Request, exc: KeyError):
        return error("not_found", str(exc.args[0] if exc.args else exc), 404)

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return error("invalid_request", str(exc), 400)

    @app.exception_handler(EmptyGraphError)
    async def _empty_graph(request: Request, exc: EmptyGraphError):
        return error("empty_graph", str(exc), 422)

    @app.exception_handler(SessionStateError)
    async def _session_state(request: Request, exc: SessionStateError):
        return error("session_state", str(exc), 409)

    @app.exception_handler(ResolutionStateError)
    async def _resolution_state(request: Request, exc: ResolutionStateError):
        return error("resolution_state", str(exc), 409)

    def get_dataset(name: str | None) -> BusNetwork:
        key = name or "default"
        if key not in state.datasets:
            raise KeyError(f"unknown dataset {key!r}")
        return state.datasets[key]

    # -- basics -------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/datasets")
    def upload_dataset(
        stops: UploadFile,
        routes: UploadFile,
        trips: UploadFile,
        road_distances: UploadFile | None = None,
    ):
        def text(f: UploadFile):
            return io.StringIO(f.file.read().decode("utf-8"))

        network = ingest_network(
            text(stops),
            text(routes),
            text(trips),
            text(road_distances) if road_distances is not None else None,
        )
        with state.lock:
            dataset_id = f"ds-{next(state.counter)}"
            state.datasets[dataset_id] = network
        return {"dataset_id": dataset_id, "report": network.report.as_dict()}

    # -- analytics ------------------------------------------------------------

    @app.get("/zones")
    def zones(count: int, dataset: str | None = None):
        net = get_dataset(dataset)
        partition = compute_zones(net, count)
        stats = zone_statistics(partition, net, net.full_window(), config.cost)
        return partition.to_geojson(stats)

    @app.get("/routes")
    def routes(
        weights: str = "passenger_flow=1",
        filters: str | None = None,
        window: str | None = None,
        dataset: str | None = None,
    ):
        net = get_dataset(dataset)
        rows = rank_routes(
            net,
            parse_weights(weights),
            parse_bounds(filters) if filters else None,
            parse_window(window) if window else None,
            config.cost,
        )
        return {
            "routes": [
                {"route_id": rid, "criteria": vec.as_dict(), "score": score}
                for rid, vec, score in rows
            ]
        }

    @app.get("/routes/{route_id}/matrix")
    def route_matrix(
        route_id: str,
        bin: str = "hourly",
        threshold: float = 100.0,
        window: str | None = None,
        dataset: str | None = None,
    ):
        net = get_dataset(dataset)
        win = parse_window(window) if window else net.full_window()
        return flow_matrix(net, route_id, win, threshold).to_dict(bin)

    @app.get("/routes/{route_id}/transfers/{stop_id}")
    def route_transfers(route_id: str, stop_id: str, dataset: str | None = None):
        net = get_dataset(dataset)
        matrix = flow_matrix(net, route_id, net.full_window(), 100.0)
        if stop_id not in set(net.routes[route_id].stops):
            raise KeyError(f"stop {stop_id!r} is not on route {route_id!r}")
        return transfer_shares(matrix, stop_id)

    # -- search sessions --------------------------------------------------------

    @app.post("/search/sessions")
    def create_search_session(payload: dict = Body(...)):
        net = get_dataset(payload.get("dataset"))
        params_in = payload.get("params") or {}
        if ("route_id" in payload) == ("stop_sets" in payload):
            raise ValueError("provide exactly one of route_id or stop_sets")
        if "route_id" in payload:
            route = net.routes.get(payload["route_id"])
            if route is None:
                raise KeyError(f"unknown route {payload['route_id']!r}")
            stop_sets = [[route.stops[0]], [route.stops[-1]]]
        else:
            stop_sets = payload["stop_sets"]

        gp = GraphParams(
            min_spacing_km=params_in.get("min_spacing_km", config.graph_params.min_spacing_km),
            max_spacing_km=params_in.get("max_spacing_km", config.graph_params.max_spacing_km),
            progress_slack=params_in.get("progress_slack", config.graph_params.progress_slack),
        )
        window = parse_window(payload["window"]) if payload.get("window") else net.full_window()
        demand = build_demand_matrix(net, window, params_in.get("catchment_radius_m", 0.0))
        graph = build_anchored_graph(net, stop_sets, gp)
        session = create_session(
            graph,
            demand,
            config.cost,
            SearchParams(
                k=int(params_in.get("k", 1)),
                c_ucb=float(params_in.get("c_ucb", SearchParams().c_ucb)),
            ),
            ranges=ranges_from_json(payload.get("ranges")),
            seed=int(params_in.get("seed", 0)),
        )

        with state.lock:
            _evict_idle(state)
            live = [r for r in state.search.values() if not r.closed]
            if len(live) >= config.max_sessions:
                raise SessionStateError("too many concurrent search sessions")
            sid = f"search-{next(state.counter)}"
            state.search[sid] = SearchRuntime(sid, session, config.snapshot_interval)
        return {"session_id": sid, "snapshot": session.snapshot().to_wire()}

    def runtime(sid: str) -> SearchRuntime:
        if sid not in state.search:
            raise KeyError(f"unknown search session {sid!r}")
        return state.search[sid]

    @app.get("/search/sessions/{sid}/stream")
    def stream(sid: str):
        rt = runtime(sid)
        return StreamingResponse(
            rt.stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.get("/search/sessions/{sid}/graph")
    def session_graph(sid: str):
        rt = runtime(sid)
        with rt.state_lock:
            return rt.session.graph.to_geojson()

    @app.post("/search/sessions/{sid}/control")
    def control(sid: str, payload: dict = Body(...)):
        rt = runtime(sid)
        action = payload.get("action")
        if action not in ("pause", "resume", "stop"):
            raise ValueError("action must be pause, resume, or stop")
        with rt.state_lock:
            status = rt.session.status
            if status in (EXHAUSTED, STOPPED) and action != "stop":
                raise SessionStateError(f"cannot {action} a {status} session")
        rt.submit(action)
        return {"accepted": action}

    @app.post("/search/sessions/{sid}/stations")
    def stations(sid: str, payload: dict = Body(...)):
        rt = runtime(sid)
        add = list(payload.get("add") or [])
        remove = list(payload.get("remove") or [])
        with rt.state_lock:
            graph = rt.session.graph
            protected = set(graph.anchors)
            bad = [s for s in remove if s in protected]
            if bad:
                raise ConstraintError(f"cannot remove anchored stops: {sorted(bad)}")
            unknown = [s for s in add + remove if s not in rt.session.graph.network.stops]
            if unknown:
                raise KeyError(f"unknown stops: {sorted(unknown)}")
        rt.submit("edit", {"add": add, "remove": remove})
        return {"accepted": {"add": add, "remove": remove}}

    # -- resolution sessions -------------------------------------------------------

    @app.post("/resolve/sessions")
    def create_resolution(payload: dict = Body(...)):
        rt = runtime(payload["search_session_id"])
        beta = int(payload.get("beta", 4))
        weights = payload.get("weights")
        with rt.state_lock:
            routes = list(rt.session.pareto.routes)
            values = dict(rt.session.pareto.routes)
            stop_order = rt.session.graph.nodes
        if not routes:
            raise SessionStateError("search session has no Pareto routes yet")
        session = create_resolution_session(routes, values, stop_order, weights, beta)
        with state.lock:
            rid = f"resolve-{next(state.counter)}"
            state.resolution[rid] = {"session": session, "lock": threading.Lock()}
        return {"session_id": rid, "state": session.to_dict()}

    def resolution(rid: str):
        if rid not in state.resolution:
            raise KeyError(f"unknown resolution session {rid!r}")
        return state.resolution[rid]

    @app.get("/resolve/sessions/{rid}")
    def get_resolution(rid: str):
        entry = resolution(rid)
        with entry["lock"]:
            return entry["session"].to_dict()

    @app.post("/resolve/sessions/{rid}/resolve")
    def post_resolve(rid: str, payload: dict = Body(...)):
        entry = resolution(rid)
        cluster = payload.get("cluster_id")
        if isinstance(cluster, str) and cluster.startswith("c"):
            cluster = int(cluster[1:])
        with entry["lock"]:
            resolve_conflict(entry["session"], int(payload.get("conflict_index", 0)), int(cluster))
            return entry["session"].to_dict()

    @app.post("/resolve/sessions/{rid}/undo")
    def post_undo(rid: str):
        entry = resolution(rid)
        with entry["lock"]:
            undo_resolve(entry["session"])
            return entry["session"].to_dict()

    @app.post("/resolve/sessions/{rid}/activate")
    def post_activate(rid: str, payload: dict = Body(...)):
        entry = resolution(rid)
        with entry["lock"]:
            entry["session"].activate_conflict(int(payload["conflict_index"]))
            return entry["session"].to_dict()

    return app


def _evict_idle(state):
    cutoff = time.time() - IDLE_EVICTION_S
    for sid in list(state.search):
        rt = state.search[sid]
        if rt.closed and rt.last_activity < cutoff:
            del state.search[sid]


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted; a missing dataset fails startup."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
