"""Bus network data model: stops, routes, smart-card trips, and travel demand.

Ingestion reads the three CSV sources (stops, routes, trips, plus optional
road distances), validates referential integrity, infers the missing tap-off
timestamps and freezes everything into an immutable :class:`BusNetwork`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import IO, Optional

import numpy as np

EARTH_RADIUS_KM = 6371.0088
ROAD_DETOUR_FACTOR = 1.3
BUS_SPEED_KMH = 20.0
DWELL_MINUTES = 2.0

# Transfer window reused by tap-off inference and transfer detection.
DEFAULT_MAX_WALK_M = 500.0
DEFAULT_MAX_WAIT_MIN = 30.0

STOPS_HEADER = ["stop_id", "name", "lat", "lon"]
ROUTES_HEADER = ["route_id", "stop_ids"]
TRIPS_HEADER = ["card_id", "tap_on", "route_id", "board_stop_id", "alight_stop_id"]
ROAD_HEADER = ["from_stop_id", "to_stop_id", "km"]


class IngestError(ValueError):
    """Raised when a source file is structurally unusable (bad header, empty)."""


class InvalidTripError(ValueError):
    """Raised for trips whose board/alight stops are inconsistent with the route."""


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance between two WGS84 points in kilometres."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def haversine_km_matrix(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Pairwise haversine distances, `lat1/lon1` rows against `lat2/lon2` columns."""
    p1 = np.radians(np.asarray(lat1, dtype=float))[:, None]
    p2 = np.radians(np.asarray(lat2, dtype=float))[None, :]
    l1 = np.radians(np.asarray(lon1, dtype=float))[:, None]
    l2 = np.radians(np.asarray(lon2, dtype=float))[None, :]
    a = np.sin((p2 - p1) / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin((l2 - l1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(a)))


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class Stop:
    stop_id: str
    name: str
    lat: float
    lon: float


@dataclass(frozen=True)
class BusRoute:
    route_id: str
    stops: tuple[str, ...]


@dataclass(frozen=True)
class TripRecord:
    card_id: str
    tap_on: datetime
    route_id: str
    board_stop: str
    alight_stop: str
    tap_off: datetime


@dataclass
class IngestReport:
    """Counts of rows dropped during ingestion, with human-readable reasons."""

    dropped_stops: int = 0
    dropped_routes: int = 0
    dropped_trips: int = 0
    dropped_road_distances: int = 0
    messages: list[str] = field(default_factory=list)

    def note(self, message: str) -> None:
        # Cap the log so a badly broken trip file cannot balloon memory.
        if len(self.messages) < 1000:
            self.messages.append(message)

    def as_dict(self) -> dict:
        return {
            "dropped_stops": self.dropped_stops,
            "dropped_routes": self.dropped_routes,
            "dropped_trips": self.dropped_trips,
            "dropped_road_distances": self.dropped_road_distances,
            "messages": list(self.messages),
        }


class BusNetwork:
    """Immutable stop/route/trip corpus with road-distance lookups.

    Road distances default to haversine times a 1.3 detour factor; explicit
    entries from ``road_distances.csv`` take precedence (reverse direction is
    consulted before the fallback).
    """

    def __init__(
        self,
        stops: dict[str, Stop],
        routes: dict[str, BusRoute],
        trips: list[TripRecord],
        road_overrides: Optional[dict[tuple[str, str], float]] = None,
        report: Optional[IngestReport] = None,
    ):
        self.stops = dict(stops)
        self.routes = dict(routes)
        self.trips = list(trips)
        self.road_overrides = dict(road_overrides or {})
        self.report = report or IngestReport()
        self._route_cum: dict[str, tuple[dict[str, int], np.ndarray]] = {}
        self._trips_by_card: Optional[dict[str, list[TripRecord]]] = None

    # -- distances ---------------------------------------------------------

    def road_distance(self, u: str, v: str) -> float:
        if u == v:
            return 0.0
        hit = self.road_overrides.get((u, v))
        if hit is None:
            hit = self.road_overrides.get((v, u))
        if hit is not None:
            return hit
        a, b = self.stops[u], self.stops[v]
        return haversine_km(a.lat, a.lon, b.lat, b.lon) * ROAD_DETOUR_FACTOR

    def road_distance_block(self, ids_u: list[str], ids_v: list[str]) -> np.ndarray:
        """Dense road-distance matrix for two id lists (overrides applied)."""
        lat_u = [self.stops[s].lat for s in ids_u]
        lon_u = [self.stops[s].lon for s in ids_u]
        lat_v = [self.stops[s].lat for s in ids_v]
        lon_v = [self.stops[s].lon for s in ids_v]
        out = haversine_km_matrix(lat_u, lon_u, lat_v, lon_v) * ROAD_DETOUR_FACTOR
        if self.road_overrides:
            iu = {s: i for i, s in enumerate(ids_u)}
            iv = {s: i for i, s in enumerate(ids_v)}
            # reverse entries act as fallback, forward entries win
            for (a, b), km in self.road_overrides.items():
                if b in iu and a in iv and (b, a) not in self.road_overrides:
                    out[iu[b], iv[a]] = km
            for (a, b), km in self.road_overrides.items():
                if a in iu and b in iv:
                    out[iu[a], iv[b]] = km
        pos_v = {s: j for j, s in enumerate(ids_v)}
        for i, u in enumerate(ids_u):
            j = pos_v.get(u)
            if j is not None:
                out[i, j] = 0.0
        return out

    # -- per-route helpers ---------------------------------------------------

    def route_positions(self, route_id: str) -> dict[str, int]:
        """First occurrence index of each stop on the route."""
        return self._route_index(route_id)[0]

    def route_cumdist(self, route_id: str) -> np.ndarray:
        """Cumulative road km along the stop sequence (0 at the first stop)."""
        return self._route_index(route_id)[1]

    def _route_index(self, route_id: str):
        cached = self._route_cum.get(route_id)
        if cached is None:
            route = self.routes[route_id]
            pos: dict[str, int] = {}
            for i, s in enumerate(route.stops):
                pos.setdefault(s, i)
            cum = np.zeros(len(route.stops))
            for i in range(1, len(route.stops)):
                cum[i] = cum[i - 1] + self.road_distance(route.stops[i - 1], route.stops[i])
            cached = (pos, cum)
            self._route_cum[route_id] = cached
        return cached

    def route_length_km(self, route_id: str) -> float:
        cum = self.route_cumdist(route_id)
        return float(cum[-1]) if len(cum) else 0.0

    def trips_by_card(self) -> dict[str, list[TripRecord]]:
        if self._trips_by_card is None:
            by_card: dict[str, list[TripRecord]] = {}
            for t in self.trips:
                by_card.setdefault(t.card_id, []).append(t)
            for card in by_card.values():
                card.sort(key=lambda t: t.tap_on)
            self._trips_by_card = by_card
        return self._trips_by_card

    def trips_in_window(self, window: tuple[datetime, datetime]) -> list[TripRecord]:
        start, end = window
        return [t for t in self.trips if start <= t.tap_on < end]

    def full_window(self) -> tuple[datetime, datetime]:
        """Smallest window covering every trip (end is exclusive)."""
        if not self.trips:
            epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
            return epoch, epoch
        lo = min(t.tap_on for t in self.trips)
        hi = max(t.tap_on for t in self.trips)
        return lo, hi + timedelta(seconds=1)

    def canonical_dict(self) -> dict:
        """Deterministic serializable form, used for the idempotency check."""
        return {
            "stops": [
                {"stop_id": s.stop_id, "name": s.name, "lat": s.lat, "lon": s.lon}
                for s in sorted(self.stops.values(), key=lambda s: s.stop_id)
            ],
            "routes": [
                {"route_id": r.route_id, "stops": list(r.stops)}
                for r in sorted(self.routes.values(), key=lambda r: r.route_id)
            ],
            "trips": [
                {
                    "card_id": t.card_id,
                    "tap_on": t.tap_on.isoformat(),
                    "route_id": t.route_id,
                    "board_stop": t.board_stop,
                    "alight_stop": t.alight_stop,
                    "tap_off": t.tap_off.isoformat(),
                }
                for t in self.trips
            ],
            "road_overrides": [
                {"from": k[0], "to": k[1], "km": v}
                for k, v in sorted(self.road_overrides.items())
            ],
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True)


@dataclass
class DemandMatrix:
    """Origin/destination passenger counts for one time window.

    With a zero catchment radius the total equals the number of in-window
    trips; a positive radius lets one trip count toward every stop pair whose
    endpoints lie within the radius, so totals may exceed the trip count.
    """

    window: tuple[datetime, datetime]
    counts: dict[tuple[str, str], int]
    catchment_radius_m: float = 0.0

    def get(self, u: str, v: str) -> int:
        return self.counts.get((u, v), 0)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def _open_source(source) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    return source


def _check_header(name: str, row: Optional[list[str]], expected: list[str]) -> None:
    if row is None:
        raise IngestError(f"{name}: file is empty, expected header {','.join(expected)}")
    got = [c.strip() for c in row]
    if got != expected:
        raise IngestError(
            f"{name} line 1: malformed header {','.join(got)!r}, expected {','.join(expected)}"
        )


def ingest_network(
    stops_source,
    routes_source,
    trips_source,
    road_distances_source=None,
    max_walk_m: float = DEFAULT_MAX_WALK_M,
    max_wait_min: float = DEFAULT_MAX_WAIT_MIN,
) -> BusNetwork:
    """Read and validate the CSV sources into a :class:`BusNetwork`.

    Rows violating referential integrity are dropped and counted in
    ``network.report``; structural defects (bad header, empty stop file)
    raise :class:`IngestError`. Tap-off timestamps are inferred here, so the
    returned trip records are complete.
    """
    report = IngestReport()

    stops: dict[str, Stop] = {}
    with _open_source(stops_source) as fh:
        reader = csv.reader(fh)
        _check_header("stops.csv", next(reader, None), STOPS_HEADER)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                stop_id, name, lat_s, lon_s = row
                lat, lon = float(lat_s), float(lon_s)
            except (ValueError, TypeError):
                report.dropped_stops += 1
                report.note(f"stops.csv line {lineno}: unparseable row")
                continue
            stop_id = stop_id.strip()
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                report.dropped_stops += 1
                report.note(f"stops.csv line {lineno}: coordinates out of range")
                continue
            if stop_id in stops:
                report.dropped_stops += 1
                report.note(f"stops.csv line {lineno}: duplicate stop_id {stop_id}")
                continue
            stops[stop_id] = Stop(stop_id, name, lat, lon)
    if not stops:
        raise IngestError("stops.csv: no valid stops")

    routes: dict[str, BusRoute] = {}
    with _open_source(routes_source) as fh:
        reader = csv.reader(fh)
        _check_header("routes.csv", next(reader, None), ROUTES_HEADER)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                report.dropped_routes += 1
                report.note(f"routes.csv line {lineno}: unparseable row")
                continue
            route_id, seq = row[0].strip(), tuple(s.strip() for s in row[1].split("|") if s.strip())
            if len(seq) < 2:
                report.dropped_routes += 1
                report.note(f"routes.csv line {lineno}: fewer than two stops")
                continue
            if any(s not in stops for s in seq):
                report.dropped_routes += 1
                report.note(f"routes.csv line {lineno}: unknown stop reference")
                continue
            if any(a == b for a, b in zip(seq, seq[1:])):
                report.dropped_routes += 1
                report.note(f"routes.csv line {lineno}: immediately repeated stop")
                continue
            if route_id in routes:
                report.dropped_routes += 1
                report.note(f"routes.csv line {lineno}: duplicate route_id {route_id}")
                continue
            routes[route_id] = BusRoute(route_id, seq)

    positions: dict[str, dict[str, int]] = {}
    for route_id, route in routes.items():
        pos: dict[str, int] = {}
        for i, s in enumerate(route.stops):
            pos.setdefault(s, i)
        positions[route_id] = pos

    raw_trips: list[tuple[str, datetime, str, str, str]] = []
    with _open_source(trips_source) as fh:
        reader = csv.reader(fh)
        _check_header("trips.csv", next(reader, None), TRIPS_HEADER)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                report.dropped_trips += 1
                report.note(f"trips.csv line {lineno}: unparseable row")
                continue
            card_id, tap_on_s, route_id, board, alight = (c.strip() for c in row)
            try:
                tap_on = parse_timestamp(tap_on_s)
            except ValueError:
                report.dropped_trips += 1
                report.note(f"trips.csv line {lineno}: bad timestamp {tap_on_s!r}")
                continue
            pos = positions.get(route_id)
            if pos is None:
                report.dropped_trips += 1
                report.note(f"trips.csv line {lineno}: unknown route_id {route_id}")
                continue
            bi = pos.get(board)
            if bi is None:
                report.dropped_trips += 1
                report.note(f"trips.csv line {lineno}: board stop not on route")
                continue
            ai = _first_occurrence_after(routes[route_id].stops, alight, bi)
            if ai is None:
                report.dropped_trips += 1
                report.note(f"trips.csv line {lineno}: alight stop not after board stop")
                continue
            raw_trips.append((card_id, tap_on, route_id, board, alight))

    road_overrides: dict[tuple[str, str], float] = {}
    if road_distances_source is not None:
        with _open_source(road_distances_source) as fh:
            reader = csv.reader(fh)
            _check_header("road_distances.csv", next(reader, None), ROAD_HEADER)
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                try:
                    u, v, km = row[0].strip(), row[1].strip(), float(row[2])
                except (ValueError, IndexError):
                    report.dropped_road_distances += 1
                    report.note(f"road_distances.csv line {lineno}: unparseable row")
                    continue
                if u not in stops or v not in stops or km < 0:
                    report.dropped_road_distances += 1
                    report.note(f"road_distances.csv line {lineno}: invalid entry")
                    continue
                road_overrides[(u, v)] = km

    network = BusNetwork(stops, routes, [], road_overrides, report)
    network.trips.extend(
        _infer_tap_offs(network, raw_trips, max_walk_m=max_walk_m, max_wait_min=max_wait_min)
    )
    network._trips_by_card = None
    return network


def _first_occurrence_after(seq: tuple[str, ...], stop: str, after: int) -> Optional[int]:
    for i in range(after + 1, len(seq)):
        if seq[i] == stop:
            return i
    return None


def _drive_time(network: BusNetwork, route_id: str, board: str, alight: str) -> timedelta:
    """Driving time between two stops of a route at 20 km/h plus per-stop dwell.

    The 2 min dwell applies to stops strictly between board and alight:
    boarding dwell is absorbed in the tap-on, alighting ends the trip.
    """
    pos = network.route_positions(route_id)
    cum = network.route_cumdist(route_id)
    bi = pos[board]
    ai = _first_occurrence_after(network.routes[route_id].stops, alight, bi)
    if ai is None:
        raise InvalidTripError(f"alight stop {alight} does not follow {board} on {route_id}")
    dist_km = float(cum[ai] - cum[bi])
    intermediates = ai - bi - 1
    return timedelta(hours=dist_km / BUS_SPEED_KMH, minutes=DWELL_MINUTES * intermediates)


def _infer_tap_offs(
    network: BusNetwork,
    raw_trips: list[tuple[str, datetime, str, str, str]],
    max_walk_m: float,
    max_wait_min: float,
) -> list[TripRecord]:
    # Group the parsed rows per card, ordered by tap-on, so each trip can look
    # at the card's immediately following record.
    order: dict[str, list[int]] = {}
    for i, (card_id, tap_on, _, _, _) in enumerate(raw_trips):
        order.setdefault(card_id, []).append(i)
    for idxs in order.values():
        idxs.sort(key=lambda i: raw_trips[i][1])

    next_of: dict[int, int] = {}
    for idxs in order.values():
        for a, b in zip(idxs, idxs[1:]):
            next_of[a] = b

    max_wait = timedelta(minutes=max_wait_min)
    records: list[TripRecord] = []
    for i, (card_id, tap_on, route_id, board, alight) in enumerate(raw_trips):
        fallback = tap_on + _drive_time(network, route_id, board, alight)
        tap_off = fallback
        j = next_of.get(i)
        if j is not None:
            _, next_on, next_route, next_board, _ = raw_trips[j]
            if (
                next_route != route_id
                and tap_on < next_on <= fallback + max_wait
                and _walk_m(network, alight, next_board) <= max_walk_m
            ):
                tap_off = next_on
        records.append(TripRecord(card_id, tap_on, route_id, board, alight, tap_off))
    return records


def _walk_m(network: BusNetwork, u: str, v: str) -> float:
    a, b = network.stops[u], network.stops[v]
    return haversine_km(a.lat, a.lon, b.lat, b.lon) * 1000.0


def infer_tap_off_time(trip: TripRecord, network: BusNetwork) -> datetime:
    """Recompute the tap-off timestamp for one trip.

    Uses the same card's next tap-on (a transfer record boarding within the
    walk/wait window of the estimated arrival) when present, otherwise the
    drive-time estimate along the route.
    """
    fallback = trip.tap_on + _drive_time(network, trip.route_id, trip.board_stop, trip.alight_stop)
    # Only the card's immediately following record counts as a transfer.
    following = [t for t in network.trips_by_card().get(trip.card_id, []) if t.tap_on > trip.tap_on]
    if following:
        nxt = following[0]
        if (
            nxt.route_id != trip.route_id
            and nxt.tap_on <= fallback + timedelta(minutes=DEFAULT_MAX_WAIT_MIN)
            and _walk_m(network, trip.alight_stop, nxt.board_stop) <= DEFAULT_MAX_WALK_M
        ):
            return nxt.tap_on
    return fallback


def build_demand_matrix(
    network: BusNetwork,
    window: tuple[datetime, datetime],
    catchment_radius_m: float = 0.0,
) -> DemandMatrix:
    """Count in-window trips per (origin, destination) stop pair.

    ``catchment_radius_m`` > 0 additionally credits a trip to every stop pair
    whose endpoints lie within the radius of the boarded/alighted stops.
    """
    if catchment_radius_m < 0:
        raise ValueError("catchment radius must be non-negative")
    counts: dict[tuple[str, str], int] = {}
    trips = network.trips_in_window(window)
    if catchment_radius_m == 0:
        for t in trips:
            key = (t.board_stop, t.alight_stop)
            counts[key] = counts.get(key, 0) + 1
        return DemandMatrix(window, counts, 0.0)

    near = _catchment_index(network, catchment_radius_m)
    for t in trips:
        for u in near[t.board_stop]:
            for v in near[t.alight_stop]:
                counts[(u, v)] = counts.get((u, v), 0) + 1
    return DemandMatrix(window, counts, catchment_radius_m)


def _catchment_index(network: BusNetwork, radius_m: float) -> dict[str, list[str]]:
    """stop -> stops within radius (straight-line), including itself."""
    from scipy.spatial import cKDTree

    ids = sorted(network.stops)
    lat = np.array([network.stops[s].lat for s in ids])
    lon = np.array([network.stops[s].lon for s in ids])
    phi, lam = np.radians(lat), np.radians(lon)
    xyz = EARTH_RADIUS_KM * np.column_stack(
        [np.cos(phi) * np.cos(lam), np.cos(phi) * np.sin(lam), np.sin(phi)]
    )
    # chord length corresponding to the arc radius
    chord = 2.0 * EARTH_RADIUS_KM * math.sin(min(radius_m / 1000.0 / EARTH_RADIUS_KM, math.pi) / 2.0)
    tree = cKDTree(xyz)
    pairs = tree.query_ball_point(xyz, chord)
    return {ids[i]: [ids[j] for j in sorted(hits)] for i, hits in enumerate(pairs)}
