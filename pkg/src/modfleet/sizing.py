"""Fleet sizing: the smallest per-station stock that never runs empty.

The sizing loop alternates deterministic simulation (with an
infinite-inventory backstop that books deficits instead of rejecting
trips) and rebalancing planning, until the per-station counts reach a
fixed point. With the returned counts, replaying the scenario without
the backstop satisfies every trip and at least one station's inventory
touches zero, so the counts are tight.
"""

from __future__ import annotations

from dataclasses import dataclass

from .demand import DemandSet
from .network import PathCache, RoadNetwork
from .rebalancing import (
    DEFAULT_LOOKAHEAD_SLICES,
    DEFAULT_SLICE_S,
    RebalancingPlan,
    build_forecast,
    plan_rebalancing,
)
from .simulation import DEFAULT_WINDOW_S, run_mod
from .stations import StationPlan, build_station_plan

MAX_SIZING_ITERATIONS = 10


@dataclass
class FleetSizing:
    """Result of the sizing loop: the station plan with final counts and
    the rebalancing plan those counts were validated against."""

    plan: StationPlan
    rebalancing: RebalancingPlan
    iterations: int
    converged: bool

    @property
    def fleet_size(self) -> int:
        return self.plan.fleet_size


def size_fleet(stations, demand: DemandSet, net: RoadNetwork, rebalancer=None,
               slice_s: float = DEFAULT_SLICE_S,
               lookahead_slices: int = DEFAULT_LOOKAHEAD_SLICES,
               window_s: float = DEFAULT_WINDOW_S,
               max_iterations: int = MAX_SIZING_ITERATIONS,
               cache: PathCache | None = None) -> FleetSizing:
    """Iterate simulation and rebalancing to a fixed point on counts.

    Each round: (1) simulate with a backstop and zero stock, recording
    every station's signed inventory trajectory; (2) set each station's
    count to the depth of its worst deficit; (3) recompute the
    rebalancing plan against the new counts. Stops when counts repeat or
    after ``max_iterations`` rounds (``converged=False`` flags the
    latter; the last iterate is returned either way).

    ``rebalancer`` may override the planner: a callable mapping counts to
    a :class:`RebalancingPlan`.
    """
    plan = stations if isinstance(stations, StationPlan) else build_station_plan(net, stations)
    cache = cache or PathCache(net)
    if rebalancer is None:
        forecasts = build_forecast(demand, plan, net, slice_s, cache)
        cost = plan.station_cost_matrix()

        def rebalancer(counts):
            return plan_rebalancing(forecasts, counts, cost, slice_s, lookahead_slices)

    empty = {s.id: 0 for s in plan.stations}
    counts = dict(empty)
    converged = False
    iterations = 0
    rebalancing = RebalancingPlan(())
    while iterations < max_iterations:
        iterations += 1
        rebalancing = rebalancer(counts)
        result = run_mod(demand, net, plan.with_counts(empty), rebalancing,
                         backstop=True, window_s=window_s, slice_s=slice_s, cache=cache)
        new_counts = {sid: max(0, -low)
                      for sid, low in result.per_station_min_inventory.items()}
        if new_counts == counts:
            converged = True
            break
        counts = new_counts
    return FleetSizing(plan.with_counts(counts), rebalancing, iterations, converged)
