"""Multi-school bus routing and scheduling.

Pipeline: build or generate an instance, route each school's stops into
feasible trips by min-cost-matching insertion (sequential or parallel),
optionally post-improve the plan with annealed stop relocations, then chain
trips onto the fewest buses via minimum path cover.
"""

from .instancegen import GenParams, generate
from .matching import (
    Assignment,
    CostMatrix,
    max_bipartite_matching,
    min_cost_assignment,
    pad_square,
)
from .mcm import (
    InsertionEvaluation,
    Mode,
    SchoolContext,
    build_cost_matrix,
    evaluate_insertion,
    initialize_trips,
    kmeans,
    make_school_context,
    mcm_route_school,
    route_all_schools,
)
from .model import (
    InfeasibleInstanceError,
    Instance,
    Metric,
    PlanMetrics,
    Point,
    RoutingPlan,
    School,
    SolverParams,
    Stop,
    Trip,
    best_insertion_position,
    build_instance,
    child_seed,
    distance,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    load_plan,
    make_trip,
    params_with_overrides,
    plan_from_dict,
    plan_metrics,
    plan_to_dict,
    save_instance,
    save_plan,
    school_service_time,
    stop_service_time,
    travel_time,
    trip_is_feasible,
    trip_school_compatible,
    trip_travel_time,
    trip_trip_compatible,
    validate_plan,
)
from .oracle import (
    OracleLimitError,
    OracleLimits,
    exact_min_buses,
    exact_min_nb_instance,
    exact_route,
    set_partitions,
)
from .pi import (
    PIState,
    TabuList,
    acceptance_probability,
    apply_move,
    build_exchange_list,
    build_neighborhood,
    closeness,
    improve,
    removal_cost,
    surrogate_cost,
)
from .scheduling import (
    REPORT_HEADER,
    Route,
    SchedulePlan,
    ScheduleReport,
    compatibility_graph,
    min_buses,
    report_row,
    save_schedule,
    schedule_report,
    schedule_to_dict,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "CostMatrix",
    "GenParams",
    "InfeasibleInstanceError",
    "InsertionEvaluation",
    "Instance",
    "Metric",
    "Mode",
    "OracleLimitError",
    "OracleLimits",
    "PIState",
    "PlanMetrics",
    "Point",
    "REPORT_HEADER",
    "Route",
    "RoutingPlan",
    "SchedulePlan",
    "ScheduleReport",
    "School",
    "SchoolContext",
    "SolverParams",
    "Stop",
    "TabuList",
    "Trip",
    "acceptance_probability",
    "apply_move",
    "best_insertion_position",
    "build_cost_matrix",
    "build_exchange_list",
    "build_instance",
    "build_neighborhood",
    "child_seed",
    "closeness",
    "compatibility_graph",
    "distance",
    "evaluate_insertion",
    "exact_min_buses",
    "exact_min_nb_instance",
    "exact_route",
    "generate",
    "improve",
    "initialize_trips",
    "instance_from_dict",
    "instance_to_dict",
    "kmeans",
    "load_instance",
    "load_plan",
    "make_school_context",
    "make_trip",
    "max_bipartite_matching",
    "mcm_route_school",
    "min_buses",
    "min_cost_assignment",
    "pad_square",
    "params_with_overrides",
    "plan_from_dict",
    "plan_metrics",
    "plan_to_dict",
    "removal_cost",
    "report_row",
    "route_all_schools",
    "save_instance",
    "save_plan",
    "save_schedule",
    "schedule_report",
    "schedule_to_dict",
    "school_service_time",
    "set_partitions",
    "stop_service_time",
    "surrogate_cost",
    "travel_time",
    "trip_is_feasible",
    "trip_school_compatible",
    "trip_travel_time",
    "trip_trip_compatible",
    "validate_plan",
]
