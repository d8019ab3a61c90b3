"""Fundamental-diagram congestion analytics over occupancy logs.

Density is time-averaged occupancy: vehicle-seconds divided by window
length, edge length and lane count, i.e. the average number of vehicles
present per meter per lane. The critical density applies per lane and
per direction (each directed edge stands alone). Every function here is
a pure function of immutable inputs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownEdge, WindowMismatch
from .network import RoadNetwork
from .simulation import TYPE_ORDER, EdgeOccupancyLog, SimulationResult, TripType

DEFAULT_CRITICAL_DENSITY = 0.08  # vehicles per meter per lane

_TYPE_INDEX = {t: i for i, t in enumerate(TYPE_ORDER)}


@dataclass(frozen=True)
class CriticalDensityConfig:
    """Critical density and the analysis thresholds derived from it.

    ``low_cut`` drops rarely used edge-windows from histograms,
    ``focus`` selects the congestion-share population, ``cap`` is where
    histogram bins stop (everything above lands in the last bin); all
    three are fractions of ``y_c``.
    """

    y_c: float = DEFAULT_CRITICAL_DENSITY
    low_cut: float = 0.01
    focus: float = 0.50
    cap: float = 2.00

    def __post_init__(self):
        if self.y_c <= 0:
            raise ValueError("y_c must be positive")
        if not 0 < self.low_cut < self.focus < self.cap:
            raise ValueError("thresholds must satisfy 0 < low_cut < focus < cap")


class DensityTable:
    """Per-type densities for every observed (edge, window) pair.

    ``windows`` is the window index range the table covers; pairs without
    occupancy are implicitly zero-density and count toward histogram
    exclusions. Rows are numpy vectors in ``TYPE_ORDER``.
    """

    def __init__(self, window_s: float, n_edges: int, windows: range,
                 rows: dict[tuple[int, int], np.ndarray]):
        self.window_s = window_s
        self.n_edges = n_edges
        self.windows = windows
        self.rows = rows

    def total(self, edge_id: int, window: int) -> float:
        row = self.rows.get((edge_id, window))
        return float(row.sum()) if row is not None else 0.0

    def scoped(self, edge_id: int, window: int, scope=None) -> float:
        row = self.rows.get((edge_id, window))
        if row is None:
            return 0.0
        if scope is None:
            return float(row.sum())
        return float(sum(row[_TYPE_INDEX[t]] for t in scope))

    def items(self):
        for key in sorted(self.rows):
            yield key, self.rows[key]

    @property
    def universe(self) -> int:
        """Edge-window pairs covered, including zero-density ones."""
        return self.n_edges * len(self.windows)

    def restrict(self, start: int, stop: int) -> "DensityTable":
        """Narrow to windows [start, stop) — e.g. a peak hour."""
        if not 0 <= start <= stop:
            raise ValueError(f"bad window range [{start}, {stop})")
        rows = {k: v for k, v in self.rows.items() if start <= k[1] < stop}
        return DensityTable(self.window_s, self.n_edges, range(start, stop), rows)


def compute_density(log: EdgeOccupancyLog, net: RoadNetwork) -> DensityTable:
    """Convert an occupancy log into per-type densities.

    density(e, w, T) = vehicle_seconds(e, w, T) / (window_s * length_m(e)
    * lanes(e)). Raises :class:`UnknownEdge` when the log references an
    edge missing from the network.
    """
    rows: dict[tuple[int, int], np.ndarray] = {}
    for (edge_id, window, ttype), (veh_s, _) in log.items():
        edge = net.edges.get(edge_id)
        if edge is None:
            raise UnknownEdge(f"occupancy log references unknown edge {edge_id}")
        row = rows.get((edge_id, window))
        if row is None:
            row = rows[(edge_id, window)] = np.zeros(len(TYPE_ORDER))
        row[_TYPE_INDEX[ttype]] += veh_s / (log.window_s * edge.length_m * edge.lanes)
    return DensityTable(log.window_s, len(net.edges), range(0, log.max_window + 1), rows)


def congested_edges(table: DensityTable, cfg: CriticalDensityConfig,
                    scope=None) -> set[tuple[int, int]]:
    """(edge, window) pairs whose density over ``scope`` (default: all
    trip types) reaches the critical density."""
    return {key for key, _ in table.items()
            if table.scoped(*key, scope=scope) >= cfg.y_c}


@dataclass(frozen=True)
class CongestionDiff:
    """Edge-windows pushed over the critical density by the MoD system:
    below y_c on demand trips alone, at or above it with all trip types."""

    newly_congested: frozenset


def congestion_diff(baseline: DensityTable, mod: DensityTable,
                    cfg: CriticalDensityConfig) -> CongestionDiff:
    """Compare a demand-only baseline against a full MoD table.

    Baseline density is read from demand trips only (the conventional
    scenario logs nothing else); the MoD side uses the total over all
    trip types. Raises :class:`WindowMismatch` when the tables disagree
    on window length, :class:`ValueError` on different networks.
    """
    if baseline.window_s != mod.window_s:
        raise WindowMismatch(
            f"window_s differs: baseline {baseline.window_s}, mod {mod.window_s}")
    if baseline.n_edges != mod.n_edges:
        raise ValueError("density tables come from different networks")
    demand_only = (TripType.DEMAND,)
    newly = set()
    for key in set(baseline.rows) | set(mod.rows):
        if (baseline.scoped(*key, scope=demand_only) < cfg.y_c
                and mod.total(*key) >= cfg.y_c):
            newly.add(key)
    return CongestionDiff(frozenset(newly))


@dataclass(frozen=True)
class ShareRow:
    distance_share: float
    congestion_share: float
    avg_km_per_vehicle_per_day: float | None


@dataclass(frozen=True)
class ShareTable:
    """Per-trip-type shares of total distance and of congestion-zone
    density mass (edge-windows above ``focus * y_c``)."""

    rows: dict[TripType, ShareRow]
    total_distance_m: float
    congestion_population: int


def share_table(result: SimulationResult, table: DensityTable,
                cfg: CriticalDensityConfig, fleet_size: int | None = None,
                horizon_days: float = 1.0) -> ShareTable:
    """Aggregate distances and congestion-zone densities by trip type.

    Congestion shares are density-weighted over the population of
    edge-windows whose total density exceeds ``focus * y_c``. The
    per-vehicle column is only meaningful for a fleet; it is None when
    ``fleet_size`` is falsy (e.g. the conventional scenario).
    """
    total_distance = sum(result.distance_by_type.values())
    threshold = cfg.focus * cfg.y_c
    mass = np.zeros(len(TYPE_ORDER))
    population = 0
    for _, row in table.items():
        if row.sum() > threshold:
            mass += row
            population += 1
    mass_total = mass.sum()
    rows = {}
    for t in TYPE_ORDER:
        distance = result.distance_by_type.get(t, 0.0)
        dist_share = distance / total_distance if total_distance > 0 else 0.0
        cong_share = float(mass[_TYPE_INDEX[t]] / mass_total) if mass_total > 0 else 0.0
        per_vehicle = None
        if fleet_size:
            per_vehicle = distance / 1000.0 / fleet_size / horizon_days
        rows[t] = ShareRow(dist_share, cong_share, per_vehicle)
    return ShareTable(rows, total_distance, population)


@dataclass(frozen=True)
class Histogram:
    """Density histogram over edge-window pairs.

    Pairs below the lower threshold are excluded (their count and
    fraction are reported); densities above ``cap * y_c`` land in the
    last bin. ``stacks`` (when present) splits each bin's count across
    trip types in proportion to their densities.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    population: int
    excluded: int
    excluded_fraction: float
    stacks: np.ndarray | None = field(default=None)


def _histogram(table: DensityTable, cfg: CriticalDensityConfig, bins: int,
               focus_only: bool, stacked: bool) -> Histogram:
    if bins < 2:
        raise ValueError("bins must be >= 2")
    threshold = (cfg.focus if focus_only else cfg.low_cut) * cfg.y_c
    cap_value = cfg.cap * cfg.y_c
    edges = np.linspace(threshold, cap_value, bins + 1)
    width = (cap_value - threshold) / bins
    counts = np.zeros(bins, dtype=np.int64)
    stacks = np.zeros((bins, len(TYPE_ORDER))) if stacked else None
    population = 0
    for _, row in table.items():
        total = row.sum()
        if total < threshold:
            continue
        population += 1
        idx = min(bins - 1, int((total - threshold) // width)) if width > 0 else 0
        counts[idx] += 1
        if stacks is not None:
            stacks[idx] += row / total
    excluded = table.universe - population
    fraction = excluded / table.universe if table.universe else 0.0
    return Histogram(edges, counts, population, excluded, fraction, stacks)


def density_histogram(table: DensityTable, cfg: CriticalDensityConfig,
                      bins: int = 20, focus_only: bool = False) -> Histogram:
    """Histogram of total densities over edge-window pairs.

    Pairs below ``low_cut * y_c`` (or below ``focus * y_c`` with
    ``focus_only``) are excluded; bins are equal-width up to
    ``cap * y_c`` with the last bin absorbing everything above.
    """
    return _histogram(table, cfg, bins, focus_only, stacked=False)


def stacked_histogram(table: DensityTable, cfg: CriticalDensityConfig,
                      bins: int = 20, focus_only: bool = False) -> Histogram:
    """As :func:`density_histogram`, but each pair's bin contribution is
    split across trip types proportionally to their densities; summing a
    bin's stacks reproduces the plain count."""
    return _histogram(table, cfg, bins, focus_only, stacked=True)


def export_heatmap(table: DensityTable, net: RoadNetwork, path,
                   scope=None) -> dict:
    """Write per-edge mean densities as GeoJSON LineString features.

    The mean is taken over the table's window range (restrict the table
    first for a peak-hour map); edges with zero density are omitted.
    Returns the FeatureCollection that was written.
    """
    n_windows = len(table.windows)
    means: dict[int, float] = {}
    for (edge_id, window), _row in table.items():
        d = table.scoped(edge_id, window, scope=scope)
        means[edge_id] = means.get(edge_id, 0.0) + (d / n_windows if n_windows else 0.0)
    features = []
    for edge_id in sorted(means):
        density = means[edge_id]
        if density <= 0.0:
            continue
        e = net.edges[edge_id]
        a, b = net.nodes[e.from_node], net.nodes[e.to_node]
        features.append({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[a.lon, a.lat], [b.lon, b.lat]],
            },
            "properties": {"edge_id": edge_id, "density": density},
        })
    collection = {"type": "FeatureCollection", "features": features}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(collection, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return collection


def save_densities(table: DensityTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["edge_id", "window_index", "trip_type", "density"])
        for (edge_id, window), row in table.items():
            for t in TYPE_ORDER:
                d = row[_TYPE_INDEX[t]]
                if d > 0.0:
                    writer.writerow([edge_id, window, t.value, repr(float(d))])


def save_share_table(shares: ShareTable, path) -> None:
    doc = {
        "types": {
            t.value: {
                "distance_share": shares.rows[t].distance_share,
                "congestion_share": shares.rows[t].congestion_share,
                "avg_km_per_vehicle_per_day": shares.rows[t].avg_km_per_vehicle_per_day,
            }
            for t in TYPE_ORDER
        },
        "total_distance_m": shares.total_distance_m,
        "congestion_population": shares.congestion_population,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_histogram(hist: Histogram, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["bin_low", "bin_high", "count"]
        if hist.stacks is not None:
            header += [t.value for t in TYPE_ORDER]
        writer.writerow(header)
        for i in range(len(hist.counts)):
            row = [repr(float(hist.bin_edges[i])), repr(float(hist.bin_edges[i + 1])),
                   int(hist.counts[i])]
            if hist.stacks is not None:
                row += [repr(float(v)) for v in hist.stacks[i]]
            writer.writerow(row)


def save_congestion_diff(diff: CongestionDiff, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["edge_id", "window_index"])
        for edge_id, window in sorted(diff.newly_congested):
            writer.writerow([edge_id, window])
