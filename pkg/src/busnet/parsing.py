"""Parsers for the compact parameter grammars shared by the CLI and the API.

Grammar examples:
    weights   passenger_flow=1,service_cost=0.5
    filters   passenger_flow=10000..,route_length=..35,service_cost=2000..
    ranges    service_time=..2.5,directness=1..9
    anchors   s1;s4,s5;s9      (sets split by ';', members by ',')
    window    2013-04-01T00:00:00Z..2013-05-01T00:00:00Z
"""

from __future__ import annotations

from .criteria import CRITERION_NAMES
from .network import parse_timestamp


def parse_weights(text: str) -> dict[str, float]:
    out = {}
    for part in _parts(text):
        name, _, value = part.partition("=")
        if not value:
            raise ValueError(f"weight {part!r} must look like name=value")
        out[name.strip()] = float(value)
    if not out:
        raise ValueError("no weights given")
    return out


def parse_bounds(text: str) -> dict[str, tuple[float | None, float | None]]:
    """name=lo..hi pairs with open ends (.. on either side)."""
    out = {}
    for part in _parts(text):
        name, _, value = part.partition("=")
        if ".." not in value:
            raise ValueError(f"bound {part!r} must look like name=lo..hi")
        lo_s, _, hi_s = value.partition("..")
        lo = float(lo_s) if lo_s.strip() else None
        hi = float(hi_s) if hi_s.strip() else None
        out[name.strip()] = (lo, hi)
    return out


def parse_ranges(text: str) -> dict[str, tuple[float | None, float | None]]:
    ranges = parse_bounds(text)
    unknown = set(ranges) - set(CRITERION_NAMES)
    if unknown:
        raise ValueError(f"unknown criterion(s) in ranges: {sorted(unknown)}")
    return ranges


def parse_anchors(text: str) -> list[list[str]]:
    sets = []
    for group in text.split(";"):
        members = [s.strip() for s in group.split(",") if s.strip()]
        if members:
            sets.append(members)
    if not sets:
        raise ValueError("no anchor stops given")
    return sets


def parse_window(text: str):
    start_s, sep, end_s = text.partition("..")
    if not sep:
        raise ValueError("window must look like start..end (ISO-8601)")
    start, end = parse_timestamp(start_s), parse_timestamp(end_s)
    if start >= end:
        raise ValueError("window start must precede its end")
    return (start, end)


def ranges_from_json(data: dict) -> dict[str, tuple[float | None, float | None]]:
    out = {}
    for name, pair in (data or {}).items():
        lo, hi = pair
        out[name] = (None if lo is None else float(lo), None if hi is None else float(hi))
    return out


def _parts(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]
