"""Network, route, and stop-level performance analytics.

Covers the exploration workflow: transportation zones with Voronoi
boundaries and per-zone glyph statistics, multi-criteria route ranking,
per-route passenger flow matrices, and same-card transfer detection.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np
import shapely
from shapely.geometry import MultiPoint, box, mapping

from .criteria import CRITERION_NAMES, HIGHER_IS_BETTER, CostParams, CriterionVector, DWELL_HOURS, service_cost
from .network import (
    DEFAULT_MAX_WAIT_MIN,
    DEFAULT_MAX_WALK_M,
    BusNetwork,
    TripRecord,
    haversine_km,
)

BEARING_SECTORS = 16

RANK_FILTER_KEYS = CRITERION_NAMES + ("route_length", "stop_count")


# ---------------------------------------------------------------------------
# transportation zones
# ---------------------------------------------------------------------------


@dataclass
class Zone:
    zone_id: str
    stop_ids: tuple[str, ...]
    boundary: object  # shapely polygon or multipolygon
    centroid: tuple[float, float]  # (lat, lon)


@dataclass
class ZonePartition:
    zones: list[Zone]

    def zone_of(self) -> dict[str, str]:
        out = {}
        for z in self.zones:
            for s in z.stop_ids:
                out[s] = z.zone_id
        return out

    def to_geojson(self, stats: dict | None = None) -> dict:
        features = []
        for z in self.zones:
            props = {
                "zone_id": z.zone_id,
                "stop_ids": list(z.stop_ids),
                "centroid": [z.centroid[1], z.centroid[0]],
            }
            if stats and z.zone_id in stats:
                props["stats"] = stats[z.zone_id].as_dict()
            features.append(
                {"type": "Feature", "geometry": mapping(z.boundary), "properties": props}
            )
        return {"type": "FeatureCollection", "features": features}


def compute_zones(network: BusNetwork, zone_count: int) -> ZonePartition:
    """Partition the stops into size-balanced spatial zones.

    Divisive hierarchical clustering: repeatedly bisect the largest cluster
    along its principal spatial axis, apportioning sizes so every final zone
    holds floor(n/k) or ceil(n/k) stops (max/min ratio <= 2). Boundaries are
    unions of the member stops' Voronoi cells clipped to the network
    bounding box inflated by 5%.
    """
    ids = sorted(network.stops)
    n = len(ids)
    if not (1 <= zone_count <= n):
        raise ValueError(f"zone_count must be in [1, {n}]")

    lat = np.array([network.stops[s].lat for s in ids])
    lon = np.array([network.stops[s].lon for s in ids])
    lat0 = float(lat.mean())
    xy = np.column_stack([(lon - lon.mean()) * 111.32 * math.cos(math.radians(lat0)), (lat - lat.mean()) * 111.32])

    groups = _balanced_bisection(xy, ids, zone_count)
    cells = _voronoi_cells(network, ids, lat, lon)

    zones = []
    for gi, members in enumerate(groups):
        boundary = shapely.unary_union([cells[m] for m in members])
        mlat = float(np.mean([network.stops[s].lat for s in members]))
        mlon = float(np.mean([network.stops[s].lon for s in members]))
        zones.append(Zone(f"z{gi:02d}", tuple(members), boundary, (mlat, mlon)))
    return ZonePartition(zones)


def _balanced_bisection(xy: np.ndarray, ids: list[str], zone_count: int) -> list[list[str]]:
    order0 = list(range(len(ids)))
    work = [(order0, zone_count)]
    done: list[list[int]] = []
    while work:
        # always bisect the largest still-divisible cluster
        work.sort(key=lambda item: (-len(item[0]), ids[item[0][0]]))
        members, quota = work.pop(0)
        if quota == 1:
            done.append(members)
            continue
        q1 = quota - quota // 2
        q2 = quota // 2
        n = len(members)
        m = n // quota
        lo = max(q1 * m, n - q2 * (m + 1))
        hi = min(q1 * (m + 1), n - q2 * m)
        n1 = min(max(round(n * q1 / quota), lo), hi)

        pts = xy[members]
        axis = _principal_axis(pts)
        proj = pts @ axis
        ranked = sorted(range(n), key=lambda i: (proj[i], ids[members[i]]))
        left = [members[i] for i in ranked[:n1]]
        right = [members[i] for i in ranked[n1:]]
        work.append((left, q1))
        work.append((right, q2))
    groups = [sorted(ids[i] for i in g) for g in done]
    groups.sort(key=lambda g: g[0])
    return groups


def _principal_axis(pts: np.ndarray) -> np.ndarray:
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    if not np.isfinite(cov).all() or np.allclose(cov, 0):
        return np.array([1.0, 0.0])
    w, v = np.linalg.eigh(cov)
    axis = v[:, int(np.argmax(w))]
    if axis[0] < 0 or (axis[0] == 0 and axis[1] < 0):
        axis = -axis
    return axis


def _voronoi_cells(network: BusNetwork, ids, lat, lon):
    pad_x = max((lon.max() - lon.min()) * 0.05, 1e-3)
    pad_y = max((lat.max() - lat.min()) * 0.05, 1e-3)
    bbox = box(lon.min() - pad_x, lat.min() - pad_y, lon.max() + pad_x, lat.max() + pad_y)
    if len(ids) == 1:
        return {ids[0]: bbox}
    points = MultiPoint([(x, y) for x, y in zip(lon, lat)])
    diagram = shapely.voronoi_polygons(points, extend_to=bbox, ordered=True)
    cells = {}
    for stop_id, cell in zip(ids, diagram.geoms):
        cells[stop_id] = cell.intersection(bbox)
    return cells


# ---------------------------------------------------------------------------
# zone statistics
# ---------------------------------------------------------------------------


@dataclass
class ZoneStats:
    route_length_avg: float = 0.0
    stop_count_avg: float = 0.0
    passenger_volume: float = 0.0
    average_load: float = 0.0
    directness_avg: float = 0.0
    service_cost_avg: float = 0.0
    outflow_by_bearing: list[int] = field(default_factory=lambda: [0] * BEARING_SECTORS)
    inflow_by_bearing: list[int] = field(default_factory=lambda: [0] * BEARING_SECTORS)

    def as_dict(self) -> dict:
        return {
            "route_length_avg": self.route_length_avg,
            "stop_count_avg": self.stop_count_avg,
            "passenger_volume": self.passenger_volume,
            "average_load": self.average_load,
            "directness_avg": self.directness_avg,
            "service_cost_avg": self.service_cost_avg,
            "outflow_by_bearing": list(self.outflow_by_bearing),
            "inflow_by_bearing": list(self.inflow_by_bearing),
        }


def bearing_deg(lat1, lon1, lat2, lon2) -> float:
    """Initial compass bearing from point 1 to point 2, degrees in [0, 360)."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    x = math.sin(dl) * math.cos(p2)
    y = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)
    return math.degrees(math.atan2(x, y)) % 360.0


def bearing_sector(bearing: float) -> int:
    """16 compass sectors, sector 0 centred on north."""
    return int(((bearing + 11.25) % 360.0) // 22.5)


def route_directness(network: BusNetwork, route_id: str) -> float:
    """Accumulated along-route vs road distance ratio over ordered stop pairs."""
    stops = network.routes[route_id].stops
    cum = network.route_cumdist(route_id)
    total = 0.0
    for i in range(len(stops)):
        for j in range(i + 1, len(stops)):
            if stops[i] == stops[j]:
                continue
            road = network.road_distance(stops[i], stops[j])
            if road > 0:
                total += (cum[j] - cum[i]) / road
    return float(total)


def route_average_load(network: BusNetwork, route_id: str, trips, days: float) -> float:
    """Length-weighted mean onboard count per day of the window."""
    stops = network.routes[route_id].stops
    cum = network.route_cumdist(route_id)
    length = float(cum[-1])
    if length <= 0 or days <= 0:
        return 0.0
    pos = network.route_positions(route_id)
    onboard = np.zeros(len(stops) - 1)
    for t in trips:
        bi = pos[t.board_stop]
        ai = _alight_index(stops, t.alight_stop, bi)
        onboard[bi:ai] += 1
    seg = np.diff(cum)
    return float((onboard * seg).sum() / (length * days))


def _alight_index(stops, alight, board_index):
    for i in range(board_index + 1, len(stops)):
        if stops[i] == alight:
            return i
    raise ValueError(f"alight stop {alight} not after index {board_index}")


def _route_service_time(network: BusNetwork, route_id: str, cost: CostParams) -> float:
    length = network.route_length_km(route_id)
    n = len(network.routes[route_id].stops)
    return length / cost.speed + DWELL_HOURS * (n - 2)


def zone_statistics(
    partition: ZonePartition,
    network: BusNetwork,
    window: tuple[datetime, datetime],
    cost: CostParams | None = None,
) -> dict[str, ZoneStats]:
    """Per-zone summary: averages over intersecting routes, boarding volume,
    and 16-sector bearing histograms of trips leaving/entering the zone."""
    cost = cost or CostParams()
    trips = network.trips_in_window(window)
    days = max((window[1] - window[0]).total_seconds() / 86400.0, 1e-9)
    trips_by_route: dict[str, list[TripRecord]] = defaultdict(list)
    for t in trips:
        trips_by_route[t.route_id].append(t)

    route_metrics = {}
    for rid, route in network.routes.items():
        route_metrics[rid] = {
            "length": network.route_length_km(rid),
            "stops": len(route.stops),
            "directness": route_directness(network, rid),
            "service_cost": service_cost(max(_route_service_time(network, rid, cost), 1e-9), cost),
            "load": route_average_load(network, rid, trips_by_route.get(rid, ()), days),
        }

    stop_zone = partition.zone_of()
    by_zone_routes: dict[str, set[str]] = defaultdict(set)
    for rid, route in network.routes.items():
        for s in route.stops:
            z = stop_zone.get(s)
            if z is not None:
                by_zone_routes[z].add(rid)

    centroids = {z.zone_id: z.centroid for z in partition.zones}
    stats = {z.zone_id: ZoneStats() for z in partition.zones}

    for zid, rids in by_zone_routes.items():
        ms = [route_metrics[r] for r in sorted(rids)]
        st = stats[zid]
        st.route_length_avg = float(np.mean([m["length"] for m in ms]))
        st.stop_count_avg = float(np.mean([m["stops"] for m in ms]))
        st.directness_avg = float(np.mean([m["directness"] for m in ms]))
        st.service_cost_avg = float(np.mean([m["service_cost"] for m in ms]))
        st.average_load = float(np.mean([m["load"] for m in ms]))

    for t in trips:
        bz = stop_zone.get(t.board_stop)
        az = stop_zone.get(t.alight_stop)
        if bz is not None:
            stats[bz].passenger_volume += 1
        if bz == az or bz is None or az is None:
            continue
        b, a = network.stops[t.board_stop], network.stops[t.alight_stop]
        clat, clon = centroids[bz]
        stats[bz].outflow_by_bearing[bearing_sector(bearing_deg(clat, clon, a.lat, a.lon))] += 1
        clat, clon = centroids[az]
        stats[az].inflow_by_bearing[bearing_sector(bearing_deg(clat, clon, b.lat, b.lon))] += 1
    return stats


# ---------------------------------------------------------------------------
# route ranking
# ---------------------------------------------------------------------------


def route_criteria(
    network: BusNetwork,
    route_id: str,
    window: tuple[datetime, datetime],
    cost: CostParams,
    trips=None,
) -> CriterionVector:
    """Criteria of an operating route from its trips in the window."""
    if trips is None:
        trips = [t for t in network.trips_in_window(window) if t.route_id == route_id]
    time = max(_route_service_time(network, route_id, cost), 1e-9)
    return CriterionVector(
        service_time=time,
        passenger_flow=float(len(trips)),
        directness=route_directness(network, route_id),
        construction_cost=len(network.routes[route_id].stops) * cost.per_stop_cost,
        service_cost=service_cost(time, cost),
    )


def rank_routes(
    network: BusNetwork,
    weights: dict[str, float],
    filters: dict[str, tuple[float | None, float | None]] | None = None,
    window: tuple[datetime, datetime] | None = None,
    cost: CostParams | None = None,
):
    """Filter and score routes by weighted normalized criteria.

    Filters accept the five criteria plus route_length and stop_count, in raw
    units. Each criterion is min-max normalized over the filtered set with
    its orientation applied, so the score is invariant to positive rescaling
    of any criterion's unit. Returns (route_id, CriterionVector, score)
    descending, ties broken by route id.
    """
    cost = cost or CostParams()
    window = window or network.full_window()
    weights = dict(weights)
    unknown = set(weights) - set(CRITERION_NAMES)
    if unknown:
        raise ValueError(f"unknown criterion(s) in weights: {sorted(unknown)}")
    if any(w < 0 for w in weights.values()) or not any(w > 0 for w in weights.values()):
        raise ValueError("weights must be non-negative and not all zero")
    filters = dict(filters or {})
    unknown = set(filters) - set(RANK_FILTER_KEYS)
    if unknown:
        raise ValueError(f"unknown filter key(s): {sorted(unknown)}")

    trips_by_route: dict[str, list[TripRecord]] = defaultdict(list)
    for t in network.trips_in_window(window):
        trips_by_route[t.route_id].append(t)

    rows = []
    for rid in sorted(network.routes):
        vec = route_criteria(network, rid, window, cost, trips_by_route.get(rid, ()))
        extras = {
            "route_length": network.route_length_km(rid),
            "stop_count": float(len(network.routes[rid].stops)),
        }
        ok = True
        for name, (lo, hi) in filters.items():
            value = extras[name] if name in extras else vec.get(name)
            if lo is not None and value < lo:
                ok = False
                break
            if hi is not None and value > hi:
                ok = False
                break
        if ok:
            rows.append((rid, vec))
    if not rows:
        return []

    norm = {}
    for name in CRITERION_NAMES:
        values = [vec.get(name) for _, vec in rows]
        lo, hi = min(values), max(values)
        if hi > lo:
            if name in HIGHER_IS_BETTER:
                norm[name] = [(v - lo) / (hi - lo) for v in values]
            else:
                norm[name] = [(hi - v) / (hi - lo) for v in values]
        else:
            norm[name] = [0.5] * len(values)

    scored = []
    for i, (rid, vec) in enumerate(rows):
        score = sum(w * norm[name][i] for name, w in weights.items())
        scored.append((rid, vec, score))
    scored.sort(key=lambda item: (-item[2], item[0]))
    return scored


def rank_to_csv(rows) -> str:
    lines = ["route_id," + ",".join(CRITERION_NAMES) + ",score"]
    for rid, vec, score in rows:
        cells = [rid] + [repr(vec.get(name)) for name in CRITERION_NAMES] + [repr(score)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# transfers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferLink:
    card_id: str
    from_route: str
    from_stop: str
    tap_off: datetime
    to_route: str
    to_stop: str
    tap_on: datetime

    def as_dict(self) -> dict:
        return {
            "card_id": self.card_id,
            "from": {"route": self.from_route, "stop": self.from_stop, "tap_off": self.tap_off.isoformat()},
            "to": {"route": self.to_route, "stop": self.to_stop, "tap_on": self.tap_on.isoformat()},
        }


def detect_transfers(
    network: BusNetwork,
    max_walk_m: float = DEFAULT_MAX_WALK_M,
    max_wait_min: float = DEFAULT_MAX_WAIT_MIN,
) -> list[TransferLink]:
    """Link consecutive same-card trips on different routes within the
    walk/wait bounds. Each trip joins at most one incoming and one outgoing
    link because only adjacent records pair up.

    A zero wait is a transfer: tap-off inference pins the first leg's
    tap_off to the second leg's tap_on when such a record exists, so the
    canonical transfer pair meets exactly at that timestamp.
    """
    max_wait = timedelta(minutes=max_wait_min)
    links = []
    for card_id in sorted(network.trips_by_card()):
        trips = network.trips_by_card()[card_id]
        for prev, nxt in zip(trips, trips[1:]):
            if prev.route_id == nxt.route_id:
                continue
            wait = nxt.tap_on - prev.tap_off
            if not (timedelta(0) <= wait <= max_wait):
                continue
            a, b = network.stops[prev.alight_stop], network.stops[nxt.board_stop]
            if haversine_km(a.lat, a.lon, b.lat, b.lon) * 1000.0 > max_walk_m:
                continue
            links.append(
                TransferLink(
                    card_id,
                    prev.route_id,
                    prev.alight_stop,
                    prev.tap_off,
                    nxt.route_id,
                    nxt.board_stop,
                    nxt.tap_on,
                )
            )
    return links


# ---------------------------------------------------------------------------
# flow matrix
# ---------------------------------------------------------------------------


@dataclass
class FlowMatrix:
    route_id: str
    stops: tuple[str, ...]
    window: tuple[datetime, datetime]
    threshold: float
    cells: dict[tuple[int, int], int]
    checkins_hourly: dict[str, list[int]]
    checkouts_hourly: dict[str, list[int]]
    checkins_weekday: dict[str, list[int]]
    checkouts_weekday: dict[str, list[int]]
    boardings: dict[str, int]
    alightings: dict[str, int]
    transfer_in: dict[str, Counter]
    transfer_out: dict[str, Counter]

    def intensity(self, i: int, j: int) -> float:
        return min(self.cells.get((i, j), 0) / self.threshold, 1.0)

    @property
    def total(self) -> int:
        return sum(self.cells.values())

    def to_dict(self, bin: str = "hourly") -> dict:
        if bin not in ("hourly", "weekday"):
            raise ValueError("bin must be 'hourly' or 'weekday'")
        checkins = self.checkins_hourly if bin == "hourly" else self.checkins_weekday
        checkouts = self.checkouts_hourly if bin == "hourly" else self.checkouts_weekday
        return {
            "route_id": self.route_id,
            "stops": list(self.stops),
            "bin": bin,
            "threshold": self.threshold,
            "cells": [
                {
                    "i": i,
                    "j": j,
                    "from": self.stops[i],
                    "to": self.stops[j],
                    "count": c,
                    "intensity": self.intensity(i, j),
                }
                for (i, j), c in sorted(self.cells.items())
            ],
            "checkins": {s: list(v) for s, v in sorted(checkins.items())},
            "checkouts": {s: list(v) for s, v in sorted(checkouts.items())},
            "boardings": dict(sorted(self.boardings.items())),
            "alightings": dict(sorted(self.alightings.items())),
            "transfers": {
                s: {
                    "in_routes": dict(sorted(self.transfer_in.get(s, Counter()).items())),
                    "out_routes": dict(sorted(self.transfer_out.get(s, Counter()).items())),
                }
                for s in self.stops
            },
        }


def flow_matrix(
    network: BusNetwork,
    route_id: str,
    window: tuple[datetime, datetime],
    intensity_threshold: float = 100.0,
    transfers: list[TransferLink] | None = None,
    max_walk_m: float = DEFAULT_MAX_WALK_M,
    max_wait_min: float = DEFAULT_MAX_WAIT_MIN,
) -> FlowMatrix:
    """Passenger flows between ordered stop pairs of one route, with
    check-in/out time histograms and transfer badges per stop."""
    if route_id not in network.routes:
        raise KeyError(f"unknown route {route_id!r}")
    if intensity_threshold <= 0:
        raise ValueError("intensity threshold must be positive")
    stops = network.routes[route_id].stops
    pos = network.route_positions(route_id)

    cells: dict[tuple[int, int], int] = defaultdict(int)
    ci_h = {s: [0] * 24 for s in stops}
    co_h = {s: [0] * 24 for s in stops}
    ci_w = {s: [0] * 7 for s in stops}
    co_w = {s: [0] * 7 for s in stops}
    boardings = {s: 0 for s in stops}
    alightings = {s: 0 for s in stops}

    for t in network.trips_in_window(window):
        if t.route_id != route_id:
            continue
        bi = pos[t.board_stop]
        ai = _alight_index(stops, t.alight_stop, bi)
        cells[(bi, ai)] += 1
        boardings[t.board_stop] += 1
        alightings[t.alight_stop] += 1
        ci_h[t.board_stop][t.tap_on.hour] += 1
        ci_w[t.board_stop][t.tap_on.weekday()] += 1
        co_h[t.alight_stop][t.tap_off.hour] += 1
        co_w[t.alight_stop][t.tap_off.weekday()] += 1

    if transfers is None:
        transfers = detect_transfers(network, max_walk_m, max_wait_min)
    t_in: dict[str, Counter] = defaultdict(Counter)
    t_out: dict[str, Counter] = defaultdict(Counter)
    stop_set = set(stops)
    for link in transfers:
        if link.to_route == route_id and link.to_stop in stop_set:
            t_in[link.to_stop][link.from_route] += 1
        if link.from_route == route_id and link.from_stop in stop_set:
            t_out[link.from_stop][link.to_route] += 1

    return FlowMatrix(
        route_id=route_id,
        stops=stops,
        window=window,
        threshold=intensity_threshold,
        cells=dict(cells),
        checkins_hourly=ci_h,
        checkouts_hourly=co_h,
        checkins_weekday=ci_w,
        checkouts_weekday=co_w,
        boardings=boardings,
        alightings=alightings,
        transfer_in=dict(t_in),
        transfer_out=dict(t_out),
    )


def transfer_shares(matrix: FlowMatrix, stop_id: str) -> dict:
    """Pie data for one stop: per-route transfer counts and shares."""
    inc = matrix.transfer_in.get(stop_id, Counter())
    out = matrix.transfer_out.get(stop_id, Counter())
    total = sum(inc.values()) + sum(out.values())
    shares = []
    for route, count in sorted(inc.items()):
        shares.append({"route": route, "count": count, "direction": "in", "share": count / total if total else 0.0})
    for route, count in sorted(out.items()):
        shares.append({"route": route, "count": count, "direction": "out", "share": count / total if total else 0.0})
    return {"stop": stop_id, "total": total, "shares": shares}


def routes_to_geojson(network: BusNetwork, route_ids=None) -> dict:
    route_ids = sorted(route_ids) if route_ids is not None else sorted(network.routes)
    features = []
    for rid in route_ids:
        stops = network.routes[rid].stops
        coords = [[network.stops[s].lon, network.stops[s].lat] for s in stops]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {"route_id": rid, "stops": list(stops)},
            }
        )
    return {"type": "FeatureCollection", "features": features}
