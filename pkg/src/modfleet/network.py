"""Directed road network: loading, shortest paths, coordinate snapping.

The network is immutable after load. All queries are pure functions, safe to
call concurrently. Shortest paths minimize travel time (with a uniform speed
limit this coincides with distance) and break ties deterministically by the
smaller edge id, so repeated runs are byte-reproducible.
"""

from __future__ import annotations

import csv
import heapq
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DanglingEdge, MalformedFile, Unreachable

EARTH_RADIUS_M = 6_371_000.0
KMH_TO_MPS = 1.0 / 3.6


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters between two WGS84 points."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class Node:
    id: int
    lat: float
    lon: float


@dataclass(frozen=True)
class RoadEdge:
    id: int
    from_node: int
    to_node: int
    length_m: float
    lanes: int
    speed_mps: float

    @property
    def travel_time_s(self) -> float:
        return self.length_m / self.speed_mps


@dataclass(frozen=True)
class Path:
    """An edge sequence with its total length and free-flow travel time."""

    edge_ids: tuple[int, ...]
    distance_m: float
    travel_time_s: float

    def __len__(self):
        return len(self.edge_ids)


EMPTY_PATH = Path((), 0.0, 0.0)


class RoadNetwork:
    """Directed graph of road edges with per-node adjacency lists.

    Attributes
    ----------
    nodes : dict[int, Node]
    edges : dict[int, RoadEdge]
    out_edges : dict[int, tuple[int, ...]]
        Outgoing edge ids per node, sorted ascending (determinism anchor).
    in_edges : dict[int, tuple[int, ...]]
        Incoming edge ids per node, sorted ascending.
    routable : frozenset[int]
        Node ids in the largest strongly connected component. Demand
        endpoints outside this set are rejected at ingestion time rather
        than surfacing as Unreachable mid-simulation.
    """

    def __init__(self, nodes: dict[int, Node], edges: dict[int, RoadEdge]):
        self.nodes = nodes
        self.edges = edges
        out: dict[int, list[int]] = {nid: [] for nid in nodes}
        inc: dict[int, list[int]] = {nid: [] for nid in nodes}
        for eid in sorted(edges):
            e = edges[eid]
            if e.from_node not in nodes:
                raise DanglingEdge(f"edge {eid} references unknown node {e.from_node}")
            if e.to_node not in nodes:
                raise DanglingEdge(f"edge {eid} references unknown node {e.to_node}")
            out[e.from_node].append(eid)
            inc[e.to_node].append(eid)
        self.out_edges = {nid: tuple(v) for nid, v in out.items()}
        self.in_edges = {nid: tuple(v) for nid, v in inc.items()}
        self.routable = self._largest_scc()
        # sorted coordinate arrays for vectorized nearest-node queries
        self._node_ids = np.array(sorted(nodes), dtype=np.int64)
        self._node_lat = np.array([nodes[i].lat for i in self._node_ids], dtype=np.float64)
        self._node_lon = np.array([nodes[i].lon for i in self._node_ids], dtype=np.float64)

    def _largest_scc(self) -> frozenset:
        if not self.nodes:
            return frozenset()
        ids = sorted(self.nodes)
        index = {nid: i for i, nid in enumerate(ids)}
        n = len(ids)
        if not self.edges:
            # every node is its own component; pick the smallest id
            return frozenset({ids[0]})
        rows = [index[e.from_node] for e in self.edges.values()]
        cols = [index[e.to_node] for e in self.edges.values()]
        graph = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
        _, labels = connected_components(graph, directed=True, connection="strong")
        counts = np.bincount(labels)
        best = int(np.argmax(counts))
        return frozenset(ids[i] for i in np.flatnonzero(labels == best))


def _parse_float(value, path, row, column):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise MalformedFile(path, row, f"column {column!r}: not a number: {value!r}") from None


def _parse_int(value, path, row, column):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise MalformedFile(path, row, f"column {column!r}: not an integer: {value!r}") from None


def load_network(nodes_path, edges_path, default_speed_kmh: float = 40.0) -> RoadNetwork:
    """Load a directed road network from ``nodes.csv`` and ``edges.csv``.

    ``nodes.csv`` header: ``id,lat,lon``. ``edges.csv`` header:
    ``id,from,to,length_m,lanes,speed_kmh`` where the speed column is
    optional. Edge speed is set to ``min(declared, default)``, or the
    default when absent, with the default given in km/h.

    Raises :class:`MalformedFile` (with the row number) on schema
    violations and :class:`DanglingEdge` when an edge references an
    unknown node. Emits a ``UserWarning`` listing nodes that fall outside
    the largest strongly connected component.
    """
    if default_speed_kmh <= 0:
        raise ValueError("default_speed_kmh must be positive")
    nodes: dict[int, Node] = {}
    with open(nodes_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "lat", "lon"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise MalformedFile(nodes_path, 1, f"header must contain {sorted(required)}")
        for row_no, row in enumerate(reader, start=2):
            nid = _parse_int(row["id"], nodes_path, row_no, "id")
            lat = _parse_float(row["lat"], nodes_path, row_no, "lat")
            lon = _parse_float(row["lon"], nodes_path, row_no, "lon")
            if nid in nodes:
                raise MalformedFile(nodes_path, row_no, f"duplicate node id {nid}")
            if not -90.0 <= lat <= 90.0:
                raise MalformedFile(nodes_path, row_no, f"lat out of range: {lat}")
            if not -180.0 <= lon <= 180.0:
                raise MalformedFile(nodes_path, row_no, f"lon out of range: {lon}")
            nodes[nid] = Node(nid, lat, lon)

    default_mps = default_speed_kmh * KMH_TO_MPS
    edges: dict[int, RoadEdge] = {}
    with open(edges_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "from", "to", "length_m", "lanes"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise MalformedFile(edges_path, 1, f"header must contain {sorted(required)}")
        has_speed = "speed_kmh" in reader.fieldnames
        for row_no, row in enumerate(reader, start=2):
            eid = _parse_int(row["id"], edges_path, row_no, "id")
            if eid in edges:
                raise MalformedFile(edges_path, row_no, f"duplicate edge id {eid}")
            u = _parse_int(row["from"], edges_path, row_no, "from")
            v = _parse_int(row["to"], edges_path, row_no, "to")
            length = _parse_float(row["length_m"], edges_path, row_no, "length_m")
            lanes = _parse_int(row["lanes"], edges_path, row_no, "lanes")
            if length <= 0:
                raise MalformedFile(edges_path, row_no, f"length_m must be > 0, got {length}")
            if lanes < 1:
                raise MalformedFile(edges_path, row_no, f"lanes must be >= 1, got {lanes}")
            declared = row.get("speed_kmh") if has_speed else None
            if declared is None or declared == "":
                speed_mps = default_mps
            else:
                declared_kmh = _parse_float(declared, edges_path, row_no, "speed_kmh")
                if declared_kmh <= 0:
                    raise MalformedFile(edges_path, row_no, f"speed_kmh must be > 0, got {declared_kmh}")
                speed_mps = min(declared_kmh, default_speed_kmh) * KMH_TO_MPS
            if u not in nodes:
                raise DanglingEdge(f"edge {eid} references unknown node {u}")
            if v not in nodes:
                raise DanglingEdge(f"edge {eid} references unknown node {v}")
            edges[eid] = RoadEdge(eid, u, v, length, lanes, speed_mps)

    net = RoadNetwork(nodes, edges)
    outside = sorted(set(nodes) - net.routable)
    if outside:
        shown = ", ".join(str(i) for i in outside[:20])
        more = "" if len(outside) <= 20 else f", ... ({len(outside) - 20} more)"
        warnings.warn(
            f"{len(outside)} node(s) outside the largest strongly connected component: {shown}{more}",
            stacklevel=2,
        )
    return net


@dataclass
class ShortestPathTree:
    """Single-source Dijkstra result: travel times plus a canonical
    predecessor-edge tree (smallest edge id among time-optimal last hops)."""

    net: RoadNetwork
    source: int
    reverse: bool
    dist: dict[int, float]
    pred: dict[int, int] = field(repr=False)

    def time_to(self, target: int) -> float:
        """Travel time source->target (target->source if reverse), +inf if unreachable."""
        return self.dist.get(target, math.inf)

    def path_to(self, target: int) -> Path:
        """Reconstruct the canonical path; raises Unreachable."""
        if target == self.source:
            return EMPTY_PATH
        if target not in self.dist:
            direction = "to" if self.reverse else "from"
            raise Unreachable(f"no directed path {direction} node {self.source} and node {target}")
        edge_ids = []
        node = target
        while node != self.source:
            eid = self.pred[node]
            edge_ids.append(eid)
            e = self.net.edges[eid]
            node = e.to_node if self.reverse else e.from_node
        if not self.reverse:
            edge_ids.reverse()
        distance = 0.0
        time = 0.0
        for eid in edge_ids:
            e = self.net.edges[eid]
            distance += e.length_m
            time += e.travel_time_s
        return Path(tuple(edge_ids), distance, time)


def dijkstra_tree(net: RoadNetwork, source: int, reverse: bool = False,
                  targets=None) -> ShortestPathTree:
    """Run Dijkstra from ``source``; with ``reverse`` the search follows
    edges backwards, yielding times *to* the source.

    ``targets`` optionally stops the search once all listed nodes are
    finalized. Ties between equal-time paths resolve to the smaller edge
    id at every node, which makes the tree canonical.
    """
    if source not in net.nodes:
        raise KeyError(f"unknown node id {source}")
    adjacency = net.in_edges if reverse else net.out_edges
    dist: dict[int, float] = {source: 0.0}
    pred: dict[int, int] = {}
    done: set[int] = set()
    remaining = None if targets is None else set(targets) - {source}
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if remaining is not None:
            remaining.discard(u)
            if not remaining:
                break
        for eid in adjacency[u]:
            e = net.edges[eid]
            v = e.from_node if reverse else e.to_node
            nd = d + e.travel_time_s
            old = dist.get(v)
            if old is None or nd < old:
                dist[v] = nd
                pred[v] = eid
                heapq.heappush(heap, (nd, v))
            elif nd == old and eid < pred[v]:
                pred[v] = eid
    return ShortestPathTree(net, source, reverse, dist, pred)


def shortest_path(net: RoadNetwork, from_node: int, to_node: int) -> Path:
    """Minimum-travel-time path between two nodes.

    Returns the empty path when ``from_node == to_node``; raises
    :class:`Unreachable` when no directed path exists.
    """
    if from_node not in net.nodes:
        raise KeyError(f"unknown node id {from_node}")
    if to_node not in net.nodes:
        raise KeyError(f"unknown node id {to_node}")
    if from_node == to_node:
        return EMPTY_PATH
    tree = dijkstra_tree(net, from_node, targets=(to_node,))
    return tree.path_to(to_node)


def node_distances(net: RoadNetwork, lat: float, lon: float):
    """Great-circle distance from (lat, lon) to every node.

    Returns (node_ids, distances_m) as parallel arrays sorted by node id.
    """
    if not net.nodes:
        raise ValueError("network has no nodes")
    phi1 = math.radians(lat)
    phi2 = np.radians(net._node_lat)
    dphi = phi2 - phi1
    dlmb = np.radians(net._node_lon - lon)
    a = np.sin(dphi / 2.0) ** 2 + math.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(a)))
    return net._node_ids, d


def nearest_node(net: RoadNetwork, lat: float, lon: float) -> int:
    """Node id minimizing great-circle distance; ties go to the smaller id."""
    ids, d = node_distances(net, lat, lon)
    candidates = ids[d == d.min()]
    return int(candidates.min())


class PathCache:
    """Memoizes point-to-point shortest paths on one immutable network.

    Repeated scenario runs (notably the fleet-sizing fixed point) query
    the same origin/destination pairs many times.
    """

    def __init__(self, net: RoadNetwork):
        self.net = net
        self._paths: dict[tuple[int, int], Path] = {}

    def path(self, from_node: int, to_node: int) -> Path:
        key = (from_node, to_node)
        hit = self._paths.get(key)
        if hit is None:
            hit = self._paths[key] = shortest_path(self.net, from_node, to_node)
        return hit


def travel_time_matrix(net: RoadNetwork, sources, targets, jobs: int = 1) -> np.ndarray:
    """Matrix of shortest travel times in seconds; entry (i, j) is the time
    from ``sources[i]`` to ``targets[j]``, ``+inf`` for unreachable pairs.

    ``jobs`` parallelizes over sources; the result is independent of the
    worker count (each row is computed in isolation).
    """
    sources = list(sources)
    targets = list(targets)
    for nid in sources + targets:
        if nid not in net.nodes:
            raise KeyError(f"unknown node id {nid}")
    matrix = np.full((len(sources), len(targets)), math.inf, dtype=np.float64)

    def fill_row(i):
        tree = dijkstra_tree(net, sources[i], targets=targets)
        for j, t in enumerate(targets):
            matrix[i, j] = tree.time_to(t)

    if jobs > 1 and len(sources) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(fill_row, range(len(sources))))
    else:
        for i in range(len(sources)):
            fill_row(i)
    return matrix
