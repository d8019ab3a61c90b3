"""Minimum-cost balanced transportation solver.

Self-contained successive-shortest-paths routine on the bipartite
supply/demand graph; no external LP or flow solver. Arc costs are carried
as exact rationals plus an integer rank so that ties between equally
cheap solutions resolve toward lexicographically smaller (from, to)
pairs, keeping full runs reproducible bit for bit.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = ["solve_transportation", "transport_cost"]


class _ResidualGraph:
    """Arc-list residual graph with paired forward/backward arcs."""

    def __init__(self, n_nodes):
        self.n = n_nodes
        self.to = []
        self.cap = []
        self.cost_p = []  # primary cost, exact Fraction
        self.cost_r = []  # rank tie-break, int
        self.head = [[] for _ in range(n_nodes)]

    def add_arc(self, u, v, cap, cost_p, cost_r):
        self.head[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(cap)
        self.cost_p.append(cost_p)
        self.cost_r.append(cost_r)
        self.head[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0)
        self.cost_p.append(-cost_p)
        self.cost_r.append(-cost_r)

    def shortest_path(self, source, sink):
        """Bellman-Ford over (primary, rank) with lexicographic comparison.

        Residual arcs can carry negative costs, but no negative cycle
        exists while the running flow is optimal, so V-1 rounds suffice.
        Returns the predecessor-arc list or None when the sink is
        unreachable.
        """
        dist = [None] * self.n
        dist[source] = (Fraction(0), 0)
        pred = [-1] * self.n
        for _ in range(self.n - 1):
            changed = False
            for arc in range(len(self.to)):
                if self.cap[arc] <= 0:
                    continue
                u = self.to[arc ^ 1]
                if dist[u] is None:
                    continue
                cand = (dist[u][0] + self.cost_p[arc], dist[u][1] + self.cost_r[arc])
                v = self.to[arc]
                if dist[v] is None or cand < dist[v]:
                    dist[v] = cand
                    pred[v] = arc
                    changed = True
            if not changed:
                break
        if dist[sink] is None:
            return None
        return pred


def solve_transportation(supply: dict, demand: dict, cost) -> dict:
    """Move ``min(sum supply, sum demand)`` units at minimum total cost.

    Parameters
    ----------
    supply, demand : dict
        Units available / wanted per key; non-positive entries are ignored.
    cost : callable or mapping
        ``cost[(s, d)]`` or ``cost(s, d)`` giving a finite cost >= 0 for
        every supply/demand key pair.

    Returns
    -------
    dict[(supply_key, demand_key), int]
        Integral flows >= 1. Row sums never exceed the supply, column
        sums never exceed the demand, and the total equals the target.
    """
    lookup = cost if callable(cost) else (lambda s, d: cost[(s, d)])
    srcs = [k for k in sorted(supply) if supply[k] > 0]
    dsts = [k for k in sorted(demand) if demand[k] > 0]
    total = min(sum(supply[k] for k in srcs), sum(demand[k] for k in dsts))
    if total == 0:
        return {}

    m, k = len(srcs), len(dsts)
    source = 0
    sink = m + k + 1
    g = _ResidualGraph(m + k + 2)
    for i, s in enumerate(srcs):
        g.add_arc(source, 1 + i, supply[s], Fraction(0), 0)
    cross_arcs = {}
    for i, s in enumerate(srcs):
        for j, d in enumerate(dsts):
            c = lookup(s, d)
            if not c >= 0 or c != c or c == float("inf"):
                raise ValueError(f"cost({s}, {d}) must be finite and >= 0, got {c}")
            cross_arcs[(i, j)] = len(g.to)
            g.add_arc(1 + i, 1 + m + j, total, Fraction(c), i * k + j)
    for j, d in enumerate(dsts):
        g.add_arc(1 + m + j, sink, demand[d], Fraction(0), 0)

    pushed = 0
    while pushed < total:
        pred = g.shortest_path(source, sink)
        if pred is None:
            raise AssertionError("transportation network lost feasibility mid-solve")
        bottleneck = total - pushed
        v = sink
        while v != source:
            arc = pred[v]
            bottleneck = min(bottleneck, g.cap[arc])
            v = g.to[arc ^ 1]
        v = sink
        while v != source:
            arc = pred[v]
            g.cap[arc] -= bottleneck
            g.cap[arc ^ 1] += bottleneck
            v = g.to[arc ^ 1]
        pushed += bottleneck

    flows = {}
    for (i, j), arc in sorted(cross_arcs.items()):
        units = g.cap[arc ^ 1]
        if units > 0:
            flows[(srcs[i], dsts[j])] = units
    return flows


def transport_cost(flows: dict, cost) -> float:
    """Total cost of a flow assignment, summed in sorted key order so two
    identical assignments always produce the identical float."""
    lookup = cost if callable(cost) else (lambda s, d: cost[(s, d)])
    return sum(units * lookup(s, d) for (s, d), units in sorted(flows.items()))
