"""Station placement and the station plan used by dispatch.

Stations are the k-means centers of the demand point cloud, snapped to
network nodes. Nearest-station relations are directional on purpose: a
pick-up drives station->node, a drop-off drives node->station, and on a
directed graph those can differ.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clustering import lloyd_kmeans, plane_to_latlon, project_to_plane
from .demand import DemandSet
from .errors import NotEnoughPoints
from .network import RoadNetwork, ShortestPathTree, dijkstra_tree, node_distances

DEFAULT_STATION_COUNT = 40
PICKUP_TIME_BOUND_S = 180.0


@dataclass(frozen=True)
class Station:
    id: int
    node: int


@dataclass
class StationPlan:
    """Stations plus the routing artifacts dispatch needs.

    ``nearest_station_of_node`` follows the dispatch direction (travel
    time station -> node); ``dropoff_station_of_node`` follows the
    return direction (node -> station). ``initial_counts`` is the number
    of vehicles parked at each station when the scenario starts.
    """

    stations: tuple[Station, ...]
    initial_counts: dict[int, int]
    nearest_station_of_node: dict[int, int]
    dropoff_station_of_node: dict[int, int]
    pickup_trees: dict[int, ShortestPathTree] = field(repr=False)
    dropoff_trees: dict[int, ShortestPathTree] = field(repr=False)

    @property
    def fleet_size(self) -> int:
        return sum(self.initial_counts.values())

    def with_counts(self, counts: dict[int, int]) -> "StationPlan":
        return StationPlan(
            self.stations,
            {s.id: int(counts.get(s.id, 0)) for s in self.stations},
            self.nearest_station_of_node,
            self.dropoff_station_of_node,
            self.pickup_trees,
            self.dropoff_trees,
        )

    def station_cost_matrix(self) -> dict[tuple[int, int], float]:
        """Travel seconds between station pairs, keyed by (from, to)."""
        by_id = {s.id: s for s in self.stations}
        return {
            (a, b): self.pickup_trees[a].time_to(by_id[b].node)
            for a in by_id
            for b in by_id
        }


def build_station_plan(net: RoadNetwork, stations, initial_counts=None,
                       jobs: int = 1) -> StationPlan:
    """Compute both nearest-station maps and per-station path trees.

    ``jobs`` parallelizes the per-station searches; the result does not
    depend on the worker count.
    """
    stations = tuple(stations)
    if jobs > 1 and len(stations) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fwd = list(pool.map(lambda s: dijkstra_tree(net, s.node), stations))
            rev = list(pool.map(lambda s: dijkstra_tree(net, s.node, reverse=True), stations))
        pickup_trees = {s.id: t for s, t in zip(stations, fwd)}
        dropoff_trees = {s.id: t for s, t in zip(stations, rev)}
    else:
        pickup_trees = {s.id: dijkstra_tree(net, s.node) for s in stations}
        dropoff_trees = {s.id: dijkstra_tree(net, s.node, reverse=True) for s in stations}
    nearest = {}
    dropoff = {}
    for node in sorted(net.nodes):
        best_pick = min(
            ((pickup_trees[s.id].time_to(node), s.id) for s in stations),
            default=(math.inf, -1),
        )
        if math.isfinite(best_pick[0]):
            nearest[node] = best_pick[1]
        best_drop = min(
            ((dropoff_trees[s.id].time_to(node), s.id) for s in stations),
            default=(math.inf, -1),
        )
        if math.isfinite(best_drop[0]):
            dropoff[node] = best_drop[1]
    counts = {s.id: 0 for s in stations}
    if initial_counts:
        for sid, c in initial_counts.items():
            counts[int(sid)] = int(c)
    return StationPlan(stations, counts, nearest, dropoff, pickup_trees, dropoff_trees)


def _demand_points(demand: DemandSet, net: RoadNetwork, cluster_on: str) -> np.ndarray:
    pts = []
    for trip in demand:
        o = net.nodes[trip.origin]
        pts.append((o.lat, o.lon))
        if cluster_on == "both":
            d = net.nodes[trip.destination]
            pts.append((d.lat, d.lon))
    return np.array(pts, dtype=np.float64)


def plan_stations(demand: DemandSet, net: RoadNetwork, n: int = DEFAULT_STATION_COUNT,
                  seed: int = 0, cluster_on: str = "both") -> tuple[Station, ...]:
    """Place ``n`` stations by seeded k-means over the demand point cloud.

    ``cluster_on`` selects the point multiset: ``"both"`` uses origins and
    destinations, ``"origins"`` restricts to origins. Each centroid snaps
    to the nearest network node (great-circle, ties to the smaller id);
    when two centroids snap to the same node the later one re-snaps to
    the next-nearest unused node. Station ids are assigned 0..n-1 in
    ascending node order.

    Raises :class:`NotEnoughPoints` when the demand contains fewer
    distinct points than ``n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if cluster_on not in ("both", "origins"):
        raise ValueError(f"cluster_on must be 'both' or 'origins', got {cluster_on!r}")
    if not len(demand):
        raise NotEnoughPoints(f"no demand points to place {n} stations")
    latlon = _demand_points(demand, net, cluster_on)
    distinct = len(np.unique(latlon, axis=0))
    if distinct < n:
        raise NotEnoughPoints(f"{distinct} distinct demand point(s) for {n} stations")
    lat0 = float(latlon[:, 0].mean())
    planar = project_to_plane(latlon, lat0)
    rng = np.random.default_rng(seed)
    centers, _, _ = lloyd_kmeans(planar, n, rng)
    center_latlon = plane_to_latlon(centers, lat0)

    used: set[int] = set()
    chosen = []
    for lat, lon in center_latlon:
        node_ids, dists = node_distances(net, float(lat), float(lon))
        # stations must be dispatchable, so only routable nodes qualify
        for idx in np.lexsort((node_ids, dists)):
            candidate = int(node_ids[idx])
            if candidate not in used and candidate in net.routable:
                used.add(candidate)
                chosen.append(candidate)
                break
        else:
            raise NotEnoughPoints("more stations than routable network nodes")
    return tuple(Station(i, node) for i, node in enumerate(sorted(chosen)))


def mean_pickup_time(stations, demand: DemandSet, net: RoadNetwork) -> float:
    """Mean free-flow travel time from each trip origin's nearest station
    to that origin. The planning CLI flags plans above 180 s."""
    if not len(demand):
        return 0.0
    trees = {s.id: dijkstra_tree(net, s.node) for s in stations}
    total = 0.0
    for trip in demand:
        t, _ = min((trees[s.id].time_to(trip.origin), s.id) for s in stations)
        total += t
    return total / len(demand)


def save_station_plan(plan: StationPlan, path) -> None:
    doc = {
        "stations": [{"id": s.id, "node": s.node} for s in plan.stations],
        "initial_counts": {str(sid): plan.initial_counts[sid]
                           for sid in sorted(plan.initial_counts)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_station_plan(path, net: RoadNetwork, jobs: int = 1) -> StationPlan:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    stations = tuple(Station(int(s["id"]), int(s["node"])) for s in doc["stations"])
    counts = {int(k): int(v) for k, v in doc.get("initial_counts", {}).items()}
    return build_station_plan(net, stations, counts, jobs=jobs)
