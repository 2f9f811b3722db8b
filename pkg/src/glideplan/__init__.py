"""Energy-aware Bernstein-polynomial trajectory planning for gliders."""

from .aero import (
    Airframe,
    EnergySample,
    SinkPolar,
    StreamingDerivative,
    energy_rate,
    fit_polar,
    glide_sin_gamma,
    max_glide_ratio,
    netto,
    optimal_airspeed,
    polar_from_airframe,
    sg_derivative,
    sink_rate,
)
from .bernstein import (
    BernsteinCurve,
    CompositeTrajectory,
    arc_length,
    heading_rate_fraction,
    product,
    segment_from_states,
    squared_speed,
)
from .dubins import DubinsPath, Pose2D, min_turn_radius, shortest_path
from .flatness import AttitudeCommand, FlatState, flat_to_commands
from .mission import (
    ConstraintSpec,
    Metrics,
    MetricsError,
    MissionParseError,
    MissionPlan,
    Waypoint,
    build_legs,
    compute_metrics,
    emit_plot_data,
    list_scenarios,
    load_airframe,
    parse_mission,
    run_mission,
    save_airframe,
    scenario_path,
    serialize_mission,
)
from .planner import (
    CostWeights,
    GaussianObstacle,
    PlanInfeasibleError,
    PlanProblem,
    assemble_nlp,
    cruise_endpoint_states,
    default_constraints,
    dubins_seed_waypoints,
    glide_endpoint_states,
    plan_cruise,
    plan_glide,
    replan,
)
from .simulator import (
    SensorModel,
    SimLog,
    SimOptions,
    SimState,
    SimpleLeg,
    WindField,
    run_closed_loop,
    run_trim_glide,
    step,
    trim_glide,
    wind_at,
)
from .solver import SolveOptions, SolveReport

__version__ = "0.1.0"
