"""Deterministic discrete-event simulation of the two scenarios.

The engine is strictly single-threaded and fully ordered: events at equal
timestamps process rebalancing dispatches first, then demand dispatches,
then arrivals, with entity ids as the final tie-break. Travel is
free-flow (uninterrupted); congestion is a post-hoc analytic computed
from the occupancy log, never a feedback into travel times.
"""

from __future__ import annotations

import csv
import heapq
import json
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .demand import DemandSet
from .network import PathCache, RoadNetwork
from .rebalancing import RebalancingPlan
from .stations import StationPlan

DEFAULT_WINDOW_S = 600.0

# event ranks at equal timestamps
_RANK_REBALANCE = 0
_RANK_DEMAND = 1
_RANK_ARRIVAL = 2


class TripType(Enum):
    DEMAND = "demand"
    PICKUP = "pickup"
    DROPOFF = "dropoff"
    REBALANCING = "rebalancing"


TYPE_ORDER = (TripType.DEMAND, TripType.PICKUP, TripType.DROPOFF, TripType.REBALANCING)
_TYPE_RANK = {t: i for i, t in enumerate(TYPE_ORDER)}


class EdgeOccupancyLog:
    """Vehicle-seconds and traversal counts per (edge, window, trip type).

    A traversal spanning a window boundary splits its vehicle-seconds
    across windows exactly; the traversal count lands in the entry
    window. Vehicle-seconds are the basis for density analytics, counts
    are kept for flow reporting.
    """

    def __init__(self, window_s: float = DEFAULT_WINDOW_S):
        if window_s <= 0:
            raise ValueError("window_s must be positive")
        self.window_s = float(window_s)
        self._data: dict[tuple[int, int, TripType], list] = {}

    def record(self, edge_id: int, enter_s: float, exit_s: float, trip_type: TripType):
        if exit_s < enter_s:
            raise ValueError(f"exit {exit_s} before enter {enter_s}")
        entry_window = int(enter_s // self.window_s)
        cell = self._data.setdefault((edge_id, entry_window, trip_type), [0.0, 0])
        cell[1] += 1
        start = enter_s
        while start < exit_s:
            w = int(start // self.window_s)
            end = min(exit_s, (w + 1) * self.window_s)
            cell = self._data.setdefault((edge_id, w, trip_type), [0.0, 0])
            cell[0] += end - start
            start = end

    def vehicle_seconds(self, edge_id, window, trip_type) -> float:
        return self._data.get((edge_id, window, trip_type), (0.0, 0))[0]

    def traversals(self, edge_id, window, trip_type) -> int:
        return self._data.get((edge_id, window, trip_type), (0.0, 0))[1]

    @property
    def max_window(self) -> int:
        return max((k[1] for k in self._data), default=-1)

    def items(self):
        """Sorted iteration: ((edge, window, type), (veh_s, traversals))."""
        for key in sorted(self._data, key=lambda k: (k[0], k[1], _TYPE_RANK[k[2]])):
            veh_s, count = self._data[key]
            yield key, (veh_s, count)

    def __len__(self):
        return len(self._data)

    def __eq__(self, other):
        return (isinstance(other, EdgeOccupancyLog)
                and self.window_s == other.window_s
                and self._data == other._data)


def record_traversal(log: EdgeOccupancyLog, edge_id: int, enter_s: float,
                     exit_s: float, trip_type: TripType) -> EdgeOccupancyLog:
    """Add one traversal to the log (mutates and returns it)."""
    log.record(edge_id, enter_s, exit_s, trip_type)
    return log


def save_occupancy(log: EdgeOccupancyLog, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["edge_id", "window_index", "trip_type", "vehicle_seconds", "traversals"])
        for (edge, window, ttype), (veh_s, count) in log.items():
            writer.writerow([edge, window, ttype.value, repr(veh_s), count])


def load_occupancy(path, window_s: float) -> EdgeOccupancyLog:
    log = EdgeOccupancyLog(window_s)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (int(row["edge_id"]), int(row["window_index"]), TripType(row["trip_type"]))
            log._data[key] = [float(row["vehicle_seconds"]), int(row["traversals"])]
    return log


@dataclass(frozen=True)
class ServedTrip:
    """Lifecycle record of one served demand: the pick-up, ride and
    drop-off phases are contiguous by construction; the timestamps let
    tests verify it."""

    trip_id: int
    vehicle_id: int
    station_from: int
    station_to: int
    dispatch_s: float
    ride_start_s: float
    ride_end_s: float
    station_arrival_s: float


@dataclass(frozen=True)
class TraceEvent:
    time_s: float
    event: str
    entity_id: int
    detail: str


@dataclass
class SimulationResult:
    log: EdgeOccupancyLog
    distance_by_type: dict[TripType, float]
    served: int
    unsatisfied: int
    per_station_min_inventory: dict[int, int]
    fleet_size: int
    phantoms_created: int
    rebalancing_shortfall: int
    served_trips: tuple[ServedTrip, ...]
    event_trace: tuple[TraceEvent, ...] | None = None


class _Engine:
    """Shared state for one MoD run."""

    def __init__(self, net, plan, log, cache, backstop, check_invariants, trace):
        self.net = net
        self.plan = plan
        self.log = log
        self.cache = cache or PathCache(net)
        self.backstop = backstop
        self.check = check_invariants
        self.trace_rows = [] if trace else None
        self.queues = {s.id: deque() for s in plan.stations}
        self.inventory = dict(plan.initial_counts)
        self.min_inventory = dict(plan.initial_counts)
        self.en_route: dict[int, int] = {}  # vehicle id -> destination station
        vid = 0
        for s in plan.stations:
            for _ in range(plan.initial_counts.get(s.id, 0)):
                self.queues[s.id].append(vid)
                vid += 1
        self.fleet_size = vid
        self.next_phantom = vid
        self.phantoms_created = 0
        self.distance = {t: 0.0 for t in TYPE_ORDER}
        self.served = 0
        self.unsatisfied = 0
        self.shortfall = 0
        self.served_trips = []

    def trace(self, time_s, event, entity, detail=""):
        if self.trace_rows is not None:
            self.trace_rows.append(TraceEvent(time_s, event, entity, detail))

    def audit(self):
        """Structural conservation check: every vehicle is in exactly one
        place and the total matches the fleet plus backstop phantoms."""
        idle = sum(len(q) for q in self.queues.values())
        expected = self.fleet_size + self.phantoms_created
        if idle + len(self.en_route) != expected:
            raise AssertionError(
                f"vehicle conservation violated: {idle} idle + "
                f"{len(self.en_route)} en-route != {expected}")
        seen = set()
        for q in self.queues.values():
            seen.update(q)
        if len(seen) != idle or seen & set(self.en_route):
            raise AssertionError("a vehicle appears in two places")

    def log_path(self, path, start_s, trip_type):
        """Log every edge traversal of a path; returns the exit time."""
        t = start_s
        for eid in path.edge_ids:
            e = self.net.edges[eid]
            exit_t = t + e.travel_time_s
            self.log.record(eid, t, exit_t, trip_type)
            t = exit_t
        self.distance[trip_type] += path.distance_m
        return t

    def draw_vehicle(self, sid):
        """Pop the longest-idle vehicle, or a phantom under backstop.
        Returns None when the station is empty and there is no backstop."""
        queue = self.queues[sid]
        if queue:
            vid = queue.popleft()
        elif self.backstop:
            vid = self.next_phantom
            self.next_phantom += 1
            self.phantoms_created += 1
        else:
            return None
        self.inventory[sid] -= 1
        if self.inventory[sid] < self.min_inventory[sid]:
            self.min_inventory[sid] = self.inventory[sid]
        return vid

    def park_vehicle(self, sid, vid):
        self.queues[sid].append(vid)
        self.inventory[sid] += 1


def run_mod(demand: DemandSet, net: RoadNetwork, plan: StationPlan,
            rebalancing: RebalancingPlan, backstop: bool = False,
            window_s: float = DEFAULT_WINDOW_S, slice_s: float = 600.0,
            cache: PathCache | None = None, trace: bool = False,
            check_invariants: bool = False) -> SimulationResult:
    """Simulate the station-based MoD fleet serving the demand.

    Lifecycle per trip: the origin's nearest station dispatches its
    longest-idle vehicle (pick-up), the vehicle carries the passenger
    (demand), then parks at the station nearest the destination
    (drop-off). A trip finding its nearest station empty is recorded
    unsatisfied and removed, unless ``backstop`` creates a phantom
    vehicle and books the deficit in ``per_station_min_inventory``.
    Rebalancing orders dispatch at the start of their slice, moving
    fewer vehicles when inventory is short (the gap is logged).
    """
    for trip in demand:
        if trip.origin not in plan.nearest_station_of_node:
            raise ValueError(f"station plan does not cover origin node {trip.origin}")
        if trip.destination not in plan.dropoff_station_of_node:
            raise ValueError(f"station plan does not cover destination node {trip.destination}")

    eng = _Engine(net, plan, EdgeOccupancyLog(window_s), cache, backstop,
                  check_invariants, trace)
    station_node = {s.id: s.node for s in plan.stations}

    heap = []
    for trip in demand:
        heap.append((trip.depart_time_s, _RANK_DEMAND, trip.id, trip))
    for idx, order in enumerate(rebalancing.orders):
        heap.append((order.slice_index * slice_s, _RANK_REBALANCE, idx, order))
    heapq.heapify(heap)

    while heap:
        time_s, rank, entity, payload = heapq.heappop(heap)
        if rank == _RANK_ARRIVAL:
            vid, sid = payload
            del eng.en_route[vid]
            eng.park_vehicle(sid, vid)
            eng.trace(time_s, "station_arrival", vid, f"station={sid}")
        elif rank == _RANK_DEMAND:
            trip = payload
            eng.trace(time_s, "request", trip.id, f"{trip.origin}->{trip.destination}")
            sid = plan.nearest_station_of_node[trip.origin]
            vid = eng.draw_vehicle(sid)
            if vid is None:
                eng.unsatisfied += 1
                eng.trace(time_s, "unsatisfied", trip.id, f"station={sid} empty")
            else:
                pickup = plan.pickup_trees[sid].path_to(trip.origin)
                ride = eng.cache.path(trip.origin, trip.destination)
                drop_sid = plan.dropoff_station_of_node[trip.destination]
                dropoff = plan.dropoff_trees[drop_sid].path_to(trip.destination)
                eng.trace(time_s, "pickup_depart", vid,
                          f"trip={trip.id} station={sid}")
                ride_start = eng.log_path(pickup, time_s, TripType.PICKUP)
                ride_end = eng.log_path(ride, ride_start, TripType.DEMAND)
                arrival = eng.log_path(dropoff, ride_end, TripType.DROPOFF)
                eng.en_route[vid] = drop_sid
                heapq.heappush(heap, (arrival, _RANK_ARRIVAL, vid, (vid, drop_sid)))
                eng.served += 1
                eng.served_trips.append(ServedTrip(
                    trip.id, vid, sid, drop_sid, time_s, ride_start, ride_end, arrival))
        else:  # rebalancing dispatch
            order = payload
            available = len(eng.queues[order.from_station])
            moved = order.count if backstop else min(order.count, available)
            if moved < order.count:
                eng.shortfall += order.count - moved
                eng.trace(time_s, "rebalance_shortfall", entity,
                          f"{order.from_station}->{order.to_station} missing {order.count - moved}")
            path = plan.pickup_trees[order.from_station].path_to(station_node[order.to_station])
            for _ in range(moved):
                vid = eng.draw_vehicle(order.from_station)
                arrival = eng.log_path(path, time_s, TripType.REBALANCING)
                eng.en_route[vid] = order.to_station
                heapq.heappush(heap, (arrival, _RANK_ARRIVAL, vid, (vid, order.to_station)))
                eng.trace(time_s, "rebalance_depart", vid,
                          f"{order.from_station}->{order.to_station}")
        if check_invariants:
            eng.audit()

    trace_rows = None
    if eng.trace_rows is not None:
        trace_rows = tuple(sorted(eng.trace_rows, key=lambda r: (r.time_s, r.entity_id, r.event)))
    return SimulationResult(
        log=eng.log,
        distance_by_type=eng.distance,
        served=eng.served,
        unsatisfied=eng.unsatisfied,
        per_station_min_inventory=dict(sorted(eng.min_inventory.items())),
        fleet_size=eng.fleet_size,
        phantoms_created=eng.phantoms_created,
        rebalancing_shortfall=eng.shortfall,
        served_trips=tuple(eng.served_trips),
        event_trace=trace_rows,
    )


def run_conventional(demand: DemandSet, net: RoadNetwork,
                     window_s: float = DEFAULT_WINDOW_S,
                     cache: PathCache | None = None,
                     trace: bool = False) -> SimulationResult:
    """Simulate every trip as a private vehicle: it materializes at the
    origin at departure, drives the shortest path at free-flow speed
    (demand occupancy only) and vanishes at the destination."""
    cache = cache or PathCache(net)
    log = EdgeOccupancyLog(window_s)
    distance = {t: 0.0 for t in TYPE_ORDER}
    trace_rows = [] if trace else None
    for trip in demand:
        path = cache.path(trip.origin, trip.destination)
        t = trip.depart_time_s
        for eid in path.edge_ids:
            e = net.edges[eid]
            exit_t = t + e.travel_time_s
            log.record(eid, t, exit_t, TripType.DEMAND)
            t = exit_t
        distance[TripType.DEMAND] += path.distance_m
        if trace_rows is not None:
            trace_rows.append(TraceEvent(trip.depart_time_s, "request", trip.id,
                                         f"{trip.origin}->{trip.destination}"))
            trace_rows.append(TraceEvent(t, "trip_end", trip.id, ""))
    if trace_rows is not None:
        trace_rows.sort(key=lambda r: (r.time_s, r.entity_id, r.event))
    return SimulationResult(
        log=log,
        distance_by_type=distance,
        served=len(demand),
        unsatisfied=0,
        per_station_min_inventory={},
        fleet_size=0,
        phantoms_created=0,
        rebalancing_shortfall=0,
        served_trips=(),
        event_trace=tuple(trace_rows) if trace_rows is not None else None,
    )


def save_summary(result: SimulationResult, path) -> None:
    doc = {
        "distances_m": {t.value: result.distance_by_type[t] for t in TYPE_ORDER},
        "served": result.served,
        "unsatisfied": result.unsatisfied,
        "fleet_size": result.fleet_size,
        "phantoms_created": result.phantoms_created,
        "rebalancing_shortfall": result.rebalancing_shortfall,
        "window_s": result.log.window_s,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_summary(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def save_events(result: SimulationResult, path) -> None:
    if result.event_trace is None:
        raise ValueError("simulation was run without trace=True")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "event", "entity_id", "detail"])
        for row in result.event_trace:
            writer.writerow([repr(row.time_s), row.event, row.entity_id, row.detail])
