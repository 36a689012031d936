"""Legibility-aware local motion planning and scenario simulation."""

from .evaluation import (
    LegibilityReport,
    PosteriorModel,
    correctness,
    evaluate_trajectory,
    goal_posterior,
    legibility_score,
)
from .legibility import (
    LegibilityParams,
    PredictedPathSet,
    designated_observer,
    fov_cost,
    h_weight,
    legibility_aware_cost,
    sim_cost,
    theta_dev,
    visibility,
    weighted_similarity,
)
from .model import (
    CircleObstacle,
    Goal,
    Obstacle,
    ObserverState,
    Point2,
    RectObstacle,
    RobotState,
    ScenarioSpec,
    Trajectory,
    arc_length_prefix,
    clearance,
    velocities,
)
from .planner import (
    ControlSequence,
    PlannerFailure,
    PlannerParams,
    PlanResult,
    SimulationResult,
    plan_once,
    rollout,
    run_closed_loop,
)
from .scenario_io import (
    ScenarioError,
    load_scenario,
    parse_scenario,
    serialize_scenario,
)
from .svg_render import render_svg
from .task_cost import CostBreakdown, TaskCostWeights, task_cost

__version__ = "0.1.0"

__all__ = [
    "CircleObstacle",
    "ControlSequence",
    "CostBreakdown",
    "Goal",
    "LegibilityParams",
    "LegibilityReport",
    "Obstacle",
    "ObserverState",
    "PlanResult",
    "PlannerFailure",
    "PlannerParams",
    "Point2",
    "PosteriorModel",
    "PredictedPathSet",
    "RectObstacle",
    "RobotState",
    "ScenarioError",
    "ScenarioSpec",
    "SimulationResult",
    "TaskCostWeights",
    "Trajectory",
    "arc_length_prefix",
    "clearance",
    "correctness",
    "designated_observer",
    "evaluate_trajectory",
    "fov_cost",
    "goal_posterior",
    "h_weight",
    "legibility_aware_cost",
    "legibility_score",
    "load_scenario",
    "parse_scenario",
    "plan_once",
    "render_svg",
    "rollout",
    "run_closed_loop",
    "serialize_scenario",
    "sim_cost",
    "task_cost",
    "theta_dev",
    "velocities",
    "visibility",
    "weighted_similarity",
]
