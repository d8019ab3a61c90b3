"""Independent brute-force oracles used by unit and acceptance tests.

Everything here is written straight from the definitions, deliberately
ignoring how the library computes the same quantities.
"""

from __future__ import annotations

import itertools
import math

from modfleet.network import Node, RoadEdge, RoadNetwork


def build_network(node_coords, edge_specs, speed_mps=40 / 3.6):
    """Construct a RoadNetwork in memory.

    node_coords: {node_id: (lat, lon)}
    edge_specs: [(edge_id, from, to, length_m)] or [(edge_id, from, to, length_m, lanes)]
    """
    nodes = {nid: Node(nid, lat, lon) for nid, (lat, lon) in node_coords.items()}
    edges = {}
    for spec in edge_specs:
        if len(spec) == 4:
            eid, u, v, length = spec
            lanes = 1
        else:
            eid, u, v, length, lanes = spec
        edges[eid] = RoadEdge(eid, u, v, float(length), lanes, speed_mps)
    return RoadNetwork(nodes, edges)


def enumerate_simple_paths(net, source, target):
    """Yield every simple path (as an edge-id tuple) from source to target."""

    def walk(node, visited, acc):
        if node == target:
            yield tuple(acc)
            return
        for eid in net.out_edges[node]:
            v = net.edges[eid].to_node
            if v in visited:
                continue
            visited.add(v)
            acc.append(eid)
            yield from walk(v, visited, acc)
            acc.pop()
            visited.discard(v)

    if source == target:
        yield ()
        return
    yield from walk(source, {source}, [])


def brute_force_shortest_time(net, source, target):
    """Minimum travel time over all simple paths, or None if unreachable."""
    best = None
    for path in enumerate_simple_paths(net, source, target):
        t = sum(net.edges[eid].travel_time_s for eid in path)
        if best is None or t < best:
            best = t
    return best


def brute_force_transport(supply, demand, cost):
    """Exhaustively enumerate integral transportation flows.

    supply, demand: dicts station -> units; cost: dict (i, j) -> cost.
    Returns (min_cost, flows) where flows is one optimal {(i, j): units}.
    Moves exactly min(sum supply, sum demand) units subject to the row and
    column bounds. Only viable for tiny instances.
    """
    si = sorted(supply)
    dj = sorted(demand)
    target = min(sum(supply.values()), sum(demand.values()))
    pairs = [(i, j) for i in si for j in dj]
    best_cost = None
    best_flow = None

    def rec(k, used_s, used_d, moved, acc_cost, flow):
        nonlocal best_cost, best_flow
        if moved == target:
            if best_cost is None or acc_cost < best_cost:
                best_cost = acc_cost
                best_flow = dict(flow)
            return
        if k == len(pairs):
            return
        i, j = pairs[k]
        cap = min(supply[i] - used_s[i], demand[j] - used_d[j], target - moved)
        for x in range(cap + 1):
            if x:
                flow[(i, j)] = x
            rec(k + 1, {**used_s, i: used_s[i] + x}, {**used_d, j: used_d[j] + x},
                moved + x, acc_cost + x * cost[(i, j)], flow)
            flow.pop((i, j), None)

    rec(0, {i: 0 for i in si}, {j: 0 for j in dj}, 0, 0.0, {})
    return best_cost, best_flow


def one_hz_occupancy(traversals, window_s):
    """Per-second occupancy accumulation for whole-second traversals.

    traversals: iterable of (edge_id, enter_s, exit_s, trip_type) with
    integer times. Returns {(edge, window, trip_type): vehicle_seconds}.
    A vehicle on the edge during [t, t+1) contributes one vehicle-second
    to the window containing t.
    """
    acc = {}
    for edge, enter, exit_, ttype in traversals:
        assert float(enter).is_integer() and float(exit_).is_integer()
        for second in range(int(enter), int(exit_)):
            key = (edge, second // int(window_s), ttype)
            acc[key] = acc.get(key, 0) + 1
    return acc


def random_connected_graph(rng, max_nodes=12):
    """Random strongly-connected-ish directed graph for path oracles.

    Guarantees a directed cycle through all nodes so every pair is
    reachable, then sprinkles extra random edges (possibly creating
    equal-cost ties via duplicate lengths).
    """
    n = rng.integers(2, max_nodes + 1)
    coords = {i: (50.0 + 0.001 * i, 14.0 + 0.0013 * (i % 5)) for i in range(n)}
    specs = []
    eid = 0
    order = list(rng.permutation(n))
    for a, b in zip(order, order[1:] + order[:1]):
        specs.append((eid, int(a), int(b), float(rng.integers(100, 1000))))
        eid += 1
    extra = rng.integers(0, 2 * n + 1)
    for _ in range(int(extra)):
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u == v:
            continue
        specs.append((eid, u, v, float(rng.integers(100, 1000))))
        eid += 1
    return build_network(coords, specs)
