"""Trip demand ingestion.

Trips arrive as coordinate pairs and are snapped to network nodes at load
time. Rows whose endpoints cannot be routed (outside the largest strongly
connected component) are dropped with a counted warning instead of
failing the run: large map extracts routinely contain islets.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

from .errors import MalformedFile
from .network import RoadNetwork, nearest_node

DAY_S = 86_400.0


@dataclass(frozen=True)
class TripRequest:
    id: int
    depart_time_s: float
    origin: int
    destination: int


@dataclass(frozen=True)
class DemandSet:
    """Trips sorted by departure time (ties by id); ids are unique."""

    trips: tuple[TripRequest, ...]

    def __len__(self):
        return len(self.trips)

    def __iter__(self):
        return iter(self.trips)


def make_demand_set(trips) -> DemandSet:
    ordered = tuple(sorted(trips, key=lambda t: (t.depart_time_s, t.id)))
    ids = [t.id for t in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("trip ids must be unique")
    return DemandSet(ordered)


def load_trips(path, net: RoadNetwork) -> DemandSet:
    """Read a trips CSV (``id,depart_time_s,origin_lat,origin_lon,dest_lat,dest_lon``)
    and snap endpoints to the nearest network nodes.

    Trips whose snapped endpoints fall outside the routable component, or
    whose endpoints snap to the same node, are dropped; one warning
    reports how many. Raises :class:`MalformedFile` on schema violations.
    """
    trips = []
    seen_ids = set()
    dropped_unroutable = 0
    dropped_degenerate = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "depart_time_s", "origin_lat", "origin_lon", "dest_lat", "dest_lon"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise MalformedFile(path, 1, f"header must contain {sorted(required)}")
        for row_no, row in enumerate(reader, start=2):
            try:
                trip_id = int(row["id"])
                depart = float(row["depart_time_s"])
                olat, olon = float(row["origin_lat"]), float(row["origin_lon"])
                dlat, dlon = float(row["dest_lat"]), float(row["dest_lon"])
            except (TypeError, ValueError) as exc:
                raise MalformedFile(path, row_no, str(exc)) from None
            if trip_id in seen_ids:
                raise MalformedFile(path, row_no, f"duplicate trip id {trip_id}")
            seen_ids.add(trip_id)
            if not 0.0 <= depart < DAY_S:
                raise MalformedFile(path, row_no, f"depart_time_s out of [0, 86400): {depart}")
            origin = nearest_node(net, olat, olon)
            destination = nearest_node(net, dlat, dlon)
            if origin not in net.routable or destination not in net.routable:
                dropped_unroutable += 1
                continue
            if origin == destination:
                dropped_degenerate += 1
                continue
            trips.append(TripRequest(trip_id, depart, origin, destination))
    if dropped_unroutable:
        warnings.warn(
            f"dropped {dropped_unroutable} trip(s) with endpoints outside the routable component",
            stacklevel=2,
        )
    if dropped_degenerate:
        warnings.warn(
            f"dropped {dropped_degenerate} trip(s) whose endpoints snap to the same node",
            stacklevel=2,
        )
    return make_demand_set(trips)
