"""Density-based swarm navigation: macroscopic transport planning over an
incrementally revealed occupancy map, with potential-field robot control."""

from .errors import (
    InfeasibleInitialDistributionError,
    InfeasibleMarginalsError,
    InvalidMatrixError,
    InvalidParameterError,
    OutOfRangeError,
    PathInfeasibleError,
    PlanInfeasibleError,
    SwarmPlanError,
    WouldEmptyMixtureError,
)
from .gaussians import (
    Gaussian2,
    Gmm,
    displacement_interpolate,
    prune_and_renormalize,
    sqrtm_spd2,
    w2_gaussian,
)
from .transport import TransportPlan, gmm_geodesic, solve_transport, wg_metric
from .world import (
    FovSet,
    GroundTruthWorld,
    ObstacleMap,
    gaussian_map_inner,
    observe_and_update,
    point_in_polygon,
)
from .micro import (
    KdeEstimate,
    SwarmState,
    attractive_gradient,
    repulsive_gradient,
    step_robots,
)
from .planner import (
    CollocationSet,
    PlannerGraph,
    PlanState,
    build_graph,
    interpolate_plan,
    plan_step,
    shortest_paths_to_targets,
    solve_control_lp,
)
from .scenario import ScenarioConfig, load_scenario, save_scenario
from .harness import (
    RunRecord,
    distance_to_go,
    energy_per_kg,
    init_run,
    run_and_write,
    run_sim,
    write_outputs,
)

__version__ = "0.1.0"

__all__ = [
    "Gaussian2",
    "Gmm",
    "TransportPlan",
    "displacement_interpolate",
    "gmm_geodesic",
    "prune_and_renormalize",
    "solve_transport",
    "sqrtm_spd2",
    "w2_gaussian",
    "wg_metric",
    "FovSet",
    "GroundTruthWorld",
    "ObstacleMap",
    "gaussian_map_inner",
    "observe_and_update",
    "point_in_polygon",
    "KdeEstimate",
    "SwarmState",
    "attractive_gradient",
    "repulsive_gradient",
    "step_robots",
    "CollocationSet",
    "PlannerGraph",
    "PlanState",
    "build_graph",
    "interpolate_plan",
    "plan_step",
    "shortest_paths_to_targets",
    "solve_control_lp",
    "ScenarioConfig",
    "load_scenario",
    "save_scenario",
    "RunRecord",
    "distance_to_go",
    "energy_per_kg",
    "init_run",
    "run_and_write",
    "run_sim",
    "write_outputs",
    "SwarmPlanError",
    "InvalidMatrixError",
    "InvalidParameterError",
    "WouldEmptyMixtureError",
    "InfeasibleMarginalsError",
    "PlanInfeasibleError",
    "PathInfeasibleError",
    "InfeasibleInitialDistributionError",
    "OutOfRangeError",
    "__version__",
]
