"""busnet: bus-network analytics and incremental Pareto route replanning.

The package splits into the data model (`network`), station graphs
(`graph`), route criteria and subspace estimates (`criteria`), the
Monte-Carlo tree search (`search`), network analytics (`analytics`),
progressive conflict resolution (`resolution`), and the HTTP/CLI surfaces
(`api`, `cli`).
"""

from .analytics import (
    FlowMatrix,
    TransferLink,
    ZonePartition,
    ZoneStats,
    compute_zones,
    detect_transfers,
    flow_matrix,
    rank_routes,
    zone_statistics,
)
from .criteria import (
    CRITERION_NAMES,
    CostParams,
    CriterionBounds,
    CriterionVector,
    DirectnessTables,
    criterion_bounds,
    evaluate_route,
    load_cost_params,
    precompute_directness_tables,
    service_cost,
    subspace_construction_cost,
    subspace_directness,
)
from .graph import (
    ConstraintError,
    EmptyGraphError,
    GraphParams,
    StationGraph,
    build_anchored_graph,
    build_station_graph,
    count_paths,
    edit_graph,
)
from .network import (
    BusNetwork,
    BusRoute,
    DemandMatrix,
    IngestError,
    IngestReport,
    Stop,
    TripRecord,
    build_demand_matrix,
    infer_tap_off_time,
    ingest_network,
)
from .resolution import (
    Conflict,
    ResolutionSession,
    RouteCluster,
    cluster_routes,
    create_resolution_session,
    detect_conflicts,
    marker_states,
    resolve,
    undo,
)
from .search import (
    ParetoSet,
    ProgressSnapshot,
    SearchParams,
    SearchSession,
    backpropagate,
    create_session,
    dominates,
    edit_stations,
    expand,
    select,
    simulate,
    step,
)

__version__ = "0.1.0"
