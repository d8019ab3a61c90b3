"""Empty-vehicle rebalancing: forecasts, per-slice flows, full plans.

The per-slice problem is a balanced transportation problem: move the
feasible amount of vehicles from surplus stations to deficit stations at
minimum total travel time. Plans are computed offline from the demand
set (the forecast has perfect knowledge) and consumed by the simulator
as a fixed schedule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .demand import DemandSet
from .errors import MalformedFile
from .network import PathCache, RoadNetwork
from .stations import StationPlan
from .transport import solve_transportation

DEFAULT_SLICE_S = 600.0
DEFAULT_LOOKAHEAD_SLICES = 2


@dataclass(frozen=True)
class SliceForecast:
    """Expected pick-up dispatches and vehicle returns per station during
    slice k, which covers [k * slice_s, (k+1) * slice_s)."""

    slice_index: int
    departures: dict[int, int] = field(default_factory=dict)
    arrivals: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class RebalancingOrder:
    slice_index: int
    from_station: int
    to_station: int
    count: int


@dataclass(frozen=True)
class RebalancingPlan:
    """Orders sorted by (slice, from, to); one order per triple."""

    orders: tuple[RebalancingOrder, ...]

    def __len__(self):
        return len(self.orders)

    def total_moves(self) -> int:
        return sum(o.count for o in self.orders)


def build_forecast(demand: DemandSet, plan: StationPlan, net: RoadNetwork,
                   slice_s: float = DEFAULT_SLICE_S,
                   cache: PathCache | None = None) -> list[SliceForecast]:
    """Count, per slice, each station's expected dispatches and returns.

    A trip books one departure at its origin's nearest station in the
    slice of its departure time, and one arrival at its destination's
    drop-off station in the slice containing departure + pick-up + ride
    + drop-off free-flow travel.
    """
    if slice_s <= 0:
        raise ValueError("slice_s must be positive")
    cache = cache or PathCache(net)
    departures: dict[int, dict[int, int]] = {}
    arrivals: dict[int, dict[int, int]] = {}
    last_slice = -1
    for trip in demand:
        origin_station = plan.nearest_station_of_node[trip.origin]
        drop_station = plan.dropoff_station_of_node[trip.destination]
        pickup_t = plan.pickup_trees[origin_station].time_to(trip.origin)
        ride_t = cache.path(trip.origin, trip.destination).travel_time_s
        drop_t = plan.dropoff_trees[drop_station].time_to(trip.destination)
        dep_slice = int(trip.depart_time_s // slice_s)
        arr_slice = int((trip.depart_time_s + pickup_t + ride_t + drop_t) // slice_s)
        dep = departures.setdefault(dep_slice, {})
        dep[origin_station] = dep.get(origin_station, 0) + 1
        arr = arrivals.setdefault(arr_slice, {})
        arr[drop_station] = arr.get(drop_station, 0) + 1
        last_slice = max(last_slice, dep_slice, arr_slice)
    return [SliceForecast(k, departures.get(k, {}), arrivals.get(k, {}))
            for k in range(last_slice + 1)]


def solve_slice(surplus: dict[int, int], deficit: dict[int, int], cost) -> list[tuple]:
    """Minimum-cost integral flows offsetting one slice's imbalance.

    Moves min(total surplus, total deficit) units subject to the per
    -station bounds; stations appearing on both sides are netted first so
    no self-loop can occur. Returns sorted (from, to, count) triples with
    count >= 1; ties between cost-equal optima resolve toward the
    lexicographically smaller (from, to).
    """
    surplus = {k: v for k, v in surplus.items() if v > 0}
    deficit = {k: v for k, v in deficit.items() if v > 0}
    for sid in sorted(set(surplus) & set(deficit)):
        net_units = min(surplus[sid], deficit[sid])
        surplus[sid] -= net_units
        deficit[sid] -= net_units
    flows = solve_transportation(surplus, deficit, cost)
    return [(i, j, c) for (i, j), c in sorted(flows.items())]


def plan_rebalancing(forecasts, initial_counts: dict[int, int], cost,
                     slice_s: float = DEFAULT_SLICE_S,
                     lookahead_slices: int = DEFAULT_LOOKAHEAD_SLICES) -> RebalancingPlan:
    """Sweep the forecast horizon and emit per-slice rebalancing orders.

    The projection keeps a per-station inventory. At the start of slice
    k (after crediting rebalancing arrivals due then), each station's
    target is its forecast departures over the lookahead window
    [k, k + lookahead); the surplus/deficit against that target feeds
    :func:`solve_slice`, whose outbound moves leave immediately and
    arrive ``ceil(travel/slice_s)`` slices later. The slice's own
    forecast flows are then applied, flooring the projection at zero
    (a station cannot dispatch vehicles it does not hold).
    """
    lookup = cost if callable(cost) else (lambda s, d: cost[(s, d)])
    stations = sorted(initial_counts)
    inv = {sid: int(initial_counts[sid]) for sid in stations}
    pending: dict[int, dict[int, int]] = {}
    orders = []
    forecasts = list(forecasts)
    by_index = {f.slice_index: f for f in forecasts}
    horizon = max(by_index, default=-1) + 1
    for k in range(horizon):
        for sid, cnt in sorted(pending.pop(k, {}).items()):
            inv[sid] += cnt
        target = {
            sid: sum(by_index[m].departures.get(sid, 0)
                     for m in range(k, k + lookahead_slices) if m in by_index)
            for sid in stations
        }
        surplus = {sid: max(0, inv[sid] - target[sid]) for sid in stations}
        deficit = {sid: max(0, target[sid] - inv[sid]) for sid in stations}
        for i, j, c in solve_slice(surplus, deficit, lookup):
            orders.append(RebalancingOrder(k, i, j, c))
            inv[i] -= c
            arrival_slice = k + int(math.ceil(lookup(i, j) / slice_s))
            if arrival_slice <= k:
                inv[j] += c
            else:
                bucket = pending.setdefault(arrival_slice, {})
                bucket[j] = bucket.get(j, 0) + c
        f = by_index.get(k)
        if f is not None:
            for sid in stations:
                inv[sid] += f.arrivals.get(sid, 0) - f.departures.get(sid, 0)
                if inv[sid] < 0:
                    inv[sid] = 0
    return RebalancingPlan(tuple(orders))


def save_rebalancing_plan(plan: RebalancingPlan, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slice_index", "from_station", "to_station", "count"])
        for o in plan.orders:
            writer.writerow([o.slice_index, o.from_station, o.to_station, o.count])


def load_rebalancing_plan(path) -> RebalancingPlan:
    orders = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"slice_index", "from_station", "to_station", "count"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise MalformedFile(path, 1, f"header must contain {sorted(required)}")
        for row_no, row in enumerate(reader, start=2):
            try:
                orders.append(RebalancingOrder(
                    int(row["slice_index"]), int(row["from_station"]),
                    int(row["to_station"]), int(row["count"])))
            except (TypeError, ValueError) as exc:
                raise MalformedFile(path, row_no, str(exc)) from None
    orders.sort(key=lambda o: (o.slice_index, o.from_station, o.to_station))
    return RebalancingPlan(tuple(orders))
