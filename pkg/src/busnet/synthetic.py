"""Synthetic smart-card corpus generation for benchmarks and demos.

Produces a clustered city of stops, meandering routes over nearby stops, and
trip records with rush-hour peaks and same-card follow-up trips, written in
the standard CSV schemas. Deterministic per seed.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

LAT0, LON0 = 39.9, 116.3
KM_PER_DEG_LAT = 111.32


def synth_corpus(
    out_dir,
    n_stops: int = 10_000,
    n_routes: int = 500,
    n_trips: int = 500_000,
    n_districts: int = 24,
    days: int = 60,
    seed: int = 0,
) -> Path:
    """Write stops.csv, routes.csv, trips.csv under ``out_dir``."""
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lat, lon = _stop_field(rng, n_stops, n_districts)
    stop_ids = [f"s{i:05d}" for i in range(n_stops)]
    with open(out / "stops.csv", "w", encoding="utf-8") as fh:
        fh.write("stop_id,name,lat,lon\n")
        for i in range(n_stops):
            fh.write(f"{stop_ids[i]},Stop {i},{lat[i]:.6f},{lon[i]:.6f}\n")

    routes = _meander_routes(rng, lat, lon, n_routes)
    with open(out / "routes.csv", "w", encoding="utf-8") as fh:
        fh.write("route_id,stop_ids\n")
        for r, seq in enumerate(routes):
            fh.write(f"r{r:04d},{'|'.join(stop_ids[i] for i in seq)}\n")

    _write_trips(out / "trips.csv", rng, routes, stop_ids, n_trips, days)
    return out


def _stop_field(rng, n_stops, n_districts):
    centers_lat = LAT0 + rng.uniform(-0.15, 0.15, n_districts)
    centers_lon = LON0 + rng.uniform(-0.20, 0.20, n_districts)
    weights = rng.dirichlet(np.ones(n_districts) * 2.0)
    district = rng.choice(n_districts, size=n_stops, p=weights)
    spread = 0.02
    lat = centers_lat[district] + rng.normal(0, spread, n_stops)
    lon = centers_lon[district] + rng.normal(0, spread * 1.3, n_stops)
    return lat, lon


def _meander_routes(rng, lat, lon, n_routes):
    """Routes as walks over stops 0.4 - 1.6 km apart, biased to keep heading."""
    n = len(lat)
    x = (lon - LON0) * KM_PER_DEG_LAT * math.cos(math.radians(LAT0))
    y = (lat - LAT0) * KM_PER_DEG_LAT
    cell = 1.0
    grid: dict[tuple[int, int], list[int]] = {}
    for i in range(n):
        grid.setdefault((int(x[i] // cell), int(y[i] // cell)), []).append(i)

    def neighbours(i):
        cx, cy = int(x[i] // cell), int(y[i] // cell)
        out = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                out.extend(grid.get((cx + dx, cy + dy), ()))
        return out

    routes = []
    for _ in range(n_routes):
        length = int(rng.integers(10, 36))
        start = int(rng.integers(n))
        seq = [start]
        used = {start}
        heading = rng.uniform(0, 2 * math.pi)
        for _step in range(length - 1):
            here = seq[-1]
            cand = [
                j
                for j in neighbours(here)
                if j not in used and 0.4 <= math.hypot(x[j] - x[here], y[j] - y[here]) <= 1.6
            ]
            if not cand:
                break
            hx, hy = math.cos(heading), math.sin(heading)
            scores = [
                (x[j] - x[here]) * hx + (y[j] - y[here]) * hy + rng.normal(0, 0.3)
                for j in cand
            ]
            nxt = cand[int(np.argmax(scores))]
            heading = math.atan2(y[nxt] - y[here], x[nxt] - x[here])
            seq.append(nxt)
            used.add(nxt)
        if len(seq) >= 5:
            routes.append(seq)
    while len(routes) < n_routes:
        routes.append(routes[int(rng.integers(len(routes)))])
        # duplicate walks get fresh ids; acceptable for load generation
    return routes[:n_routes]


def _write_trips(path, rng, routes, stop_ids, n_trips, days, transfer_share=0.12):
    n_routes = len(routes)
    popularity = rng.dirichlet(np.ones(n_routes) * 0.8)
    # two rush peaks plus a daytime plateau, minutes of day
    peaks = [(8 * 60, 50), (18 * 60, 60)]

    def minute_of_day(u, which):
        if which < 0.35:
            mu, sd = peaks[0]
        elif which < 0.7:
            mu, sd = peaks[1]
        else:
            return int(u * 17 * 60 + 6 * 60) % 1440
        return int(max(5 * 60, min(23 * 60, rng.normal(mu, sd))))

    # which routes pass through each stop, for plausible transfer follow-ups
    stop_routes: dict[int, list[tuple[int, int]]] = {}
    for r, seq in enumerate(routes):
        for pos, s in enumerate(seq):
            if pos < len(seq) - 1:
                stop_routes.setdefault(s, []).append((r, pos))

    n_cards = max(1000, n_trips // 8)
    written = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("card_id,tap_on,route_id,board_stop_id,alight_stop_id\n")
        route_pick = rng.choice(n_routes, size=n_trips, p=popularity)
        day_pick = rng.integers(0, days, size=n_trips)
        u1 = rng.random(n_trips)
        u2 = rng.random(n_trips)
        u3 = rng.random(n_trips)
        card_pick = rng.integers(0, n_cards, size=n_trips)
        t = 0
        while written < n_trips:
            i = t % n_trips
            t += 1
            seq = routes[route_pick[i]]
            m = len(seq)
            bi = int(u1[i] * (m - 1))
            ai = bi + 1 + int(u2[i] * (m - bi - 1))
            minute = minute_of_day(u1[i], u2[i])
            day = int(day_pick[i])
            card = f"card{int(card_pick[i]):06d}-{t}"
            fh.write(
                f"{card},{_ts(day, minute)},r{route_pick[i]:04d},"
                f"{stop_ids[seq[bi]]},{stop_ids[seq[ai]]}\n"
            )
            written += 1
            if written >= n_trips:
                break
            if u3[i] < transfer_share:
                # same card continues on another route from the alight stop
                options = [(r, p) for r, p in stop_routes.get(seq[ai], ()) if r != route_pick[i]]
                if options:
                    r2, pos = options[int(rng.integers(len(options)))]
                    seq2 = routes[r2]
                    ai2 = pos + 1 + int(rng.integers(len(seq2) - pos - 1))
                    # a few minutes past the estimated arrival of the first leg
                    minute2 = minute + (ai - bi) * 5 + int(rng.integers(3, 18))
                    if minute2 < 24 * 60:
                        fh.write(
                            f"{card},{_ts(day, minute2)},r{r2:04d},"
                            f"{stop_ids[seq2[pos]]},{stop_ids[seq2[ai2]]}\n"
                        )
                        written += 1


def _ts(day: int, minute: int) -> str:
    month, dom = 4 + day // 30, day % 30 + 1
    return f"2013-{month:02d}-{dom:02d}T{minute // 60:02d}:{minute % 60:02d}:00Z"
