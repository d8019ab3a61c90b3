"""Synthetic grid city for desk-scale experiments and tests.

A rows x cols Manhattan grid with both directions on every street, plus
optional perimeter ring roads (one wrap pair per row and per column).
A 10x10 grid with ring roads has exactly 400 directed edges. Demand is
a two-pulse commute: morning from one corner district to the opposite
one, evening back.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .demand import DemandSet, TripRequest, make_demand_set
from .network import EARTH_RADIUS_M, Node, RoadEdge, RoadNetwork

BASE_LAT = 50.0
BASE_LON = 14.4

MORNING_WINDOW_S = (25_200, 28_800)  # 07:00-08:00
EVENING_WINDOW_S = (61_200, 64_800)  # 17:00-18:00


def _grid_coords(rows, cols, spacing_m):
    deg_per_m_lat = 180.0 / (math.pi * EARTH_RADIUS_M)
    deg_per_m_lon = deg_per_m_lat / math.cos(math.radians(BASE_LAT))
    coords = {}
    for r in range(rows):
        for c in range(cols):
            coords[r * cols + c] = (BASE_LAT + r * spacing_m * deg_per_m_lat,
                                    BASE_LON + c * spacing_m * deg_per_m_lon)
    return coords


def make_grid_city(rows: int = 10, cols: int = 10, spacing_m: float = 100.0,
                   lanes: int = 1, speed_mps: float = 40 / 3.6,
                   ring: bool = True) -> RoadNetwork:
    """Build the grid network in memory."""
    coords = _grid_coords(rows, cols, spacing_m)
    nodes = {nid: Node(nid, lat, lon) for nid, (lat, lon) in coords.items()}
    edges = {}
    eid = 0

    def add(u, v, length):
        nonlocal eid
        edges[eid] = RoadEdge(eid, u, v, length, lanes, speed_mps)
        eid += 1

    for r in range(rows):
        for c in range(cols):
            nid = r * cols + c
            if c < cols - 1:
                add(nid, nid + 1, spacing_m)
                add(nid + 1, nid, spacing_m)
            if r < rows - 1:
                add(nid, nid + cols, spacing_m)
                add(nid + cols, nid, spacing_m)
    if ring:
        for r in range(rows):
            first, last = r * cols, r * cols + cols - 1
            add(last, first, (cols - 1) * spacing_m)
            add(first, last, (cols - 1) * spacing_m)
        for c in range(cols):
            top, bottom = c, (rows - 1) * cols + c
            add(bottom, top, (rows - 1) * spacing_m)
            add(top, bottom, (rows - 1) * spacing_m)
    return RoadNetwork(nodes, edges)


def corner_districts(rows: int, cols: int, size: int = 3):
    """Node ids of the north-west and south-east corner districts."""
    nw = [r * cols + c for r in range(size) for c in range(size)]
    se = [r * cols + c for r in range(rows - size, rows) for c in range(cols - size, cols)]
    return nw, se


def districts(rows: int, cols: int, home_size: int = 3, work_rows: int = 2,
              work_cols: int = 2):
    """Node ids of the residential (NW) and business (SE) districts.

    The residential square is ``home_size`` x ``home_size`` at the NW
    corner; the business block is ``work_rows`` x ``work_cols`` at the SE
    corner, so commutes can fan out of a diffuse home area into a
    compact destination.
    """
    home = [r * cols + c for r in range(home_size) for c in range(home_size)]
    work = [r * cols + c for r in range(rows - work_rows, rows)
            for c in range(cols - work_cols, cols)]
    return home, work


def _pulse_departures(rng, n, window, ramp):
    lo, hi = window
    if ramp == "triangular":
        mode = (lo + hi) / 2.0
        return [float(int(rng.triangular(lo, mode, hi))) for _ in range(n)]
    return [float(rng.integers(lo, hi)) for _ in range(n)]


def make_commute_demand(rows: int = 10, cols: int = 10, n_trips: int = 2000,
                        seed: int = 0, district_size: int = 3,
                        morning=MORNING_WINDOW_S, evening=EVENING_WINDOW_S,
                        work_rows: int = None, work_cols: int = None,
                        ramp: str = "uniform",
                        background_share: float = 0.0) -> DemandSet:
    """Asymmetric commute demand, everything driven by the seed.

    The commute part splits evenly: NW->SE departures in the morning
    window, SE->NW in the evening window. The home district is
    ``district_size`` square; the work district defaults to the same but
    can be shaped via ``work_rows``/``work_cols``. ``ramp="triangular"``
    peaks departures mid-window instead of spreading them uniformly.
    ``background_share`` diverts that fraction of trips into uniform
    all-day traffic between random distinct nodes (05:00-22:00).
    Departure times are whole seconds.
    """
    home, work = districts(rows, cols, district_size,
                           work_rows or district_size, work_cols or district_size)
    all_nodes = rows * cols
    rng = np.random.default_rng(seed)
    trips = []
    n_background = int(round(n_trips * background_share))
    n_commute = n_trips - n_background
    n_morning = n_commute // 2
    morning_departs = _pulse_departures(rng, n_morning, morning, ramp)
    evening_departs = _pulse_departures(rng, n_commute - n_morning, evening, ramp)
    for i in range(n_commute):
        if i < n_morning:
            origin = int(rng.choice(home))
            dest = int(rng.choice(work))
            depart = morning_departs[i]
        else:
            origin = int(rng.choice(work))
            dest = int(rng.choice(home))
            depart = evening_departs[i - n_morning]
        trips.append(TripRequest(i, depart, origin, dest))
    for i in range(n_commute, n_trips):
        origin = int(rng.integers(0, all_nodes))
        dest = int(rng.integers(0, all_nodes))
        while dest == origin:
            dest = int(rng.integers(0, all_nodes))
        depart = float(rng.integers(5 * 3600, 22 * 3600))
        trips.append(TripRequest(i, depart, origin, dest))
    return make_demand_set(trips)


def radial_districts(rows: int, cols: int, border_width: int = 2, core_size: int = 2):
    """Monocentric split: a periphery ring of homes and a compact core.

    Returns (home_nodes, core_nodes): home nodes lie within
    ``border_width`` of the grid edge, core nodes form a centered
    ``core_size`` x ``core_size`` block.
    """
    home = [r * cols + c for r in range(rows) for c in range(cols)
            if r < border_width or r >= rows - border_width
            or c < border_width or c >= cols - border_width]
    r0 = (rows - core_size) // 2
    c0 = (cols - core_size) // 2
    core = [r * cols + c for r in range(r0, r0 + core_size)
            for c in range(c0, c0 + core_size)]
    return home, core


def make_radial_demand(rows: int = 10, cols: int = 10, n_trips: int = 2000,
                       seed: int = 0, border_width: int = 2, core_size: int = 2,
                       morning=MORNING_WINDOW_S, evening=EVENING_WINDOW_S,
                       ramp: str = "uniform") -> DemandSet:
    """Monocentric commute: periphery -> core in the morning window, core
    -> periphery in the evening window. Demand converges onto the few
    core-entry edges from every direction, while empty-vehicle flows fan
    out radially. Departure times are whole seconds, seed-driven."""
    home, core = radial_districts(rows, cols, border_width, core_size)
    rng = np.random.default_rng(seed)
    trips = []
    n_morning = n_trips // 2
    morning_departs = _pulse_departures(rng, n_morning, morning, ramp)
    evening_departs = _pulse_departures(rng, n_trips - n_morning, evening, ramp)
    for i in range(n_trips):
        if i < n_morning:
            origin = int(rng.choice(home))
            dest = int(rng.choice(core))
            depart = morning_departs[i]
        else:
            origin = int(rng.choice(core))
            dest = int(rng.choice(home))
            depart = evening_departs[i - n_morning]
        trips.append(TripRequest(i, depart, origin, dest))
    return make_demand_set(trips)


def write_grid_city_csv(net: RoadNetwork, nodes_path, edges_path) -> None:
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "lat", "lon"])
        for nid in sorted(net.nodes):
            n = net.nodes[nid]
            writer.writerow([nid, repr(n.lat), repr(n.lon)])
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "from", "to", "length_m", "lanes"])
        for eid in sorted(net.edges):
            e = net.edges[eid]
            writer.writerow([eid, e.from_node, e.to_node, repr(e.length_m), e.lanes])


def write_trips_csv(demand: DemandSet, net: RoadNetwork, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "depart_time_s", "origin_lat", "origin_lon",
                         "dest_lat", "dest_lon"])
        for t in demand:
            o, d = net.nodes[t.origin], net.nodes[t.destination]
            writer.writerow([t.id, repr(t.depart_time_s), repr(o.lat), repr(o.lon),
                             repr(d.lat), repr(d.lon)])
