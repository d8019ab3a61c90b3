"""Station-based mobility-on-demand fleet simulation and congestion analytics."""

from .errors import (
    DanglingEdge,
    MalformedFile,
    ModfleetError,
    NotEnoughPoints,
    Unreachable,
    UnknownEdge,
    WindowMismatch,
)
from .network import (
    Node,
    Path,
    PathCache,
    RoadEdge,
    RoadNetwork,
    dijkstra_tree,
    haversine_m,
    load_network,
    nearest_node,
    shortest_path,
    travel_time_matrix,
)
from .demand import DemandSet, TripRequest, load_trips, make_demand_set
from .stations import (
    Station,
    StationPlan,
    build_station_plan,
    load_station_plan,
    mean_pickup_time,
    plan_stations,
    save_station_plan,
)
from .transport import solve_transportation, transport_cost
from .rebalancing import (
    RebalancingOrder,
    RebalancingPlan,
    SliceForecast,
    build_forecast,
    load_rebalancing_plan,
    plan_rebalancing,
    save_rebalancing_plan,
    solve_slice,
)
from .simulation import (
    EdgeOccupancyLog,
    ServedTrip,
    SimulationResult,
    TripType,
    TYPE_ORDER,
    load_occupancy,
    record_traversal,
    run_conventional,
    run_mod,
    save_occupancy,
    save_summary,
)
from .sizing import FleetSizing, size_fleet
from .analytics import (
    CongestionDiff,
    CriticalDensityConfig,
    DensityTable,
    Histogram,
    ShareTable,
    compute_density,
    congested_edges,
    congestion_diff,
    density_histogram,
    export_heatmap,
    share_table,
    stacked_histogram,
)

__version__ = "0.1.0"
