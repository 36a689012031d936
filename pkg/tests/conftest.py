"""Shared fixtures: scenario paths and small hand-built worlds."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from legiplan import (
    CircleObstacle,
    Goal,
    LegibilityParams,
    ObserverState,
    PlannerParams,
    Point2,
    RobotState,
    ScenarioSpec,
    TaskCostWeights,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

SCENARIO_NAMES = (
    "fig1_two_goals",
    "fig3_obstacle_detour",
    "fig4_fov_sweep_left",
    "fig4_fov_sweep_center",
    "fig4_fov_sweep_right",
    "restaurant_front",
    "restaurant_side",
)


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR


def make_robot(**overrides) -> RobotState:
    fields = dict(
        position=Point2(0.0, 0.0),
        heading=0.0,
        speed=0.0,
        radius=0.3,
        v_max=1.0,
        a_max=1.0,
        omega_max=math.pi / 2,
    )
    fields.update(overrides)
    return RobotState(**fields)


def make_scenario(**overrides) -> ScenarioSpec:
    """Small two-goal world with a fast planner, for unit tests."""
    fields = dict(
        robot=make_robot(),
        goals=(
            Goal("G1", Point2(4.0, 0.8), is_target=True),
            Goal("G2", Point2(4.0, -0.8)),
        ),
        observers=(ObserverState("O1", Point2(4.8, 0.8), math.pi, attached_goal="G1"),),
        obstacles=(CircleObstacle(Point2(2.0, -0.9), 0.3),),
        planner=PlannerParams(
            cem_population=32, cem_iterations=3, horizon_w=8, max_cycles=120
        ),
        task_weights=TaskCostWeights(w_goal=2.0, v_pref=0.8),
        legibility=LegibilityParams(lambda_sim=4.0, lambda_fov=1.0),
        seed=3,
    )
    fields.update(overrides)
    return ScenarioSpec(**fields)


def random_trajectory(rng: np.random.Generator, steps: int = 8, dt: float = 0.4):
    from legiplan import Trajectory

    start = rng.uniform(-3, 3, size=2)
    deltas = rng.normal(scale=0.4, size=(steps, 2))
    return Trajectory(np.vstack([start, start + np.cumsum(deltas, axis=0)]), dt)
