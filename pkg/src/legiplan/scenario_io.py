"""Scenario file parsing/validation and trajectory log serialization.

Scenario files are strict JSON: unknown keys are rejected so a typo can
never silently change the physics. Angles are degrees in files and radians
internally; the conversion happens only at this boundary.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .legibility import LegibilityParams
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
    clearance,
    wrap_angle,
)
from .planner import PlannerParams, SimulationResult
from .task_cost import TaskCostWeights

SCHEMA_VERSION = 1

CSV_HEADER = "t,x,y,heading,v,omega,clearance"


class ScenarioError(ValueError):
    """A scenario file violated the schema or an invariant.

    `path` locates the offending value (JSON-path style), `rule` states the
    violated rule.
    """

    def __init__(self, path: str, rule: str):
        super().__init__(f"{path}: {rule}")
        self.path = path
        self.rule = rule


def _check_keys(obj: dict, path: str, allowed: set[str]) -> None:
    for key in obj:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}", "unknown key")


def _as_object(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(path, "must be an object")
    return value


def _number(obj: dict, path: str, key: str, default: float | None = None) -> float:
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{path}.{key}", "required key missing")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}.{key}", "must be a number")
    if not math.isfinite(value):
        raise ScenarioError(f"{path}.{key}", "must be finite")
    return float(value)


def _integer(obj: dict, path: str, key: str, default: int | None = None) -> int:
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{path}.{key}", "required key missing")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}.{key}", "must be an integer")
    return value


def _point(obj: dict, path: str, key: str) -> Point2:
    if key not in obj:
        raise ScenarioError(f"{path}.{key}", "required key missing")
    value = obj[key]
    if (
        not isinstance(value, list)
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
    ):
        raise ScenarioError(f"{path}.{key}", "must be a [x, y] pair of numbers")
    if any(not math.isfinite(v) for v in value):
        raise ScenarioError(f"{path}.{key}", "coordinates must be finite")
    return Point2(float(value[0]), float(value[1]))


def _string(obj: dict, path: str, key: str, default: str | None = None) -> str:
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{path}.{key}", "required key missing")
        return default
    value = obj[key]
    if not isinstance(value, str):
        raise ScenarioError(f"{path}.{key}", "must be a string")
    return value


def _parse_robot(obj: dict, path: str) -> RobotState:
    _check_keys(
        obj, path,
        {"position", "heading_deg", "speed", "radius", "v_max", "a_max", "omega_max_deg"},
    )
    position = _point(obj, path, "position")
    speed = _number(obj, path, "speed", 0.0)
    radius = _number(obj, path, "radius", 0.3)
    v_max = _number(obj, path, "v_max", 1.0)
    a_max = _number(obj, path, "a_max", 1.0)
    omega_max_deg = _number(obj, path, "omega_max_deg", 90.0)
    if radius <= 0:
        raise ScenarioError(f"{path}.radius", "must be positive")
    if v_max <= 0:
        raise ScenarioError(f"{path}.v_max", "must be positive")
    if a_max <= 0:
        raise ScenarioError(f"{path}.a_max", "must be positive")
    if omega_max_deg <= 0:
        raise ScenarioError(f"{path}.omega_max_deg", "must be positive")
    if not 0 <= speed <= v_max:
        raise ScenarioError(f"{path}.speed", "must satisfy 0 <= speed <= v_max")
    return RobotState(
        position=position,
        heading=wrap_angle(math.radians(_number(obj, path, "heading_deg", 0.0))),
        speed=speed,
        radius=radius,
        v_max=v_max,
        a_max=a_max,
        omega_max=math.radians(omega_max_deg),
    )


def _parse_goal(obj: dict, path: str) -> Goal:
    _check_keys(obj, path, {"id", "position", "is_target"})
    is_target = obj.get("is_target", False)
    if not isinstance(is_target, bool):
        raise ScenarioError(f"{path}.is_target", "must be a boolean")
    return Goal(
        id=_string(obj, path, "id"),
        position=_point(obj, path, "position"),
        is_target=is_target,
    )


def _parse_observer(obj: dict, path: str) -> ObserverState:
    _check_keys(obj, path, {"id", "position", "heading_deg", "fov_deg", "attached_goal"})
    fov_deg = _number(obj, path, "fov_deg", 120.0)
    if not 0 < fov_deg <= 360.0:
        raise ScenarioError(f"{path}.fov_deg", "must lie in (0, 360]")
    attached = obj.get("attached_goal")
    if attached is not None and not isinstance(attached, str):
        raise ScenarioError(f"{path}.attached_goal", "must be a string")
    return ObserverState(
        id=_string(obj, path, "id"),
        position=_point(obj, path, "position"),
        heading=wrap_angle(math.radians(_number(obj, path, "heading_deg", 0.0))),
        fov=math.radians(fov_deg),
        attached_goal=attached,
    )


def _parse_obstacle(obj: dict, path: str) -> Obstacle:
    kind = _string(obj, path, "type")
    if kind == "circle":
        _check_keys(obj, path, {"type", "center", "radius"})
        radius = _number(obj, path, "radius")
        if radius <= 0:
            raise ScenarioError(f"{path}.radius", "must be positive")
        return CircleObstacle(center=_point(obj, path, "center"), radius=radius)
    if kind == "rect":
        _check_keys(obj, path, {"type", "min", "max"})
        low = _point(obj, path, "min")
        high = _point(obj, path, "max")
        if not (low.x < high.x and low.y < high.y):
            raise ScenarioError(path, "rect min must be strictly below max componentwise")
        return RectObstacle(min=low, max=high)
    raise ScenarioError(f"{path}.type", "must be 'circle' or 'rect'")


def _parse_planner(obj: dict, path: str, robot: RobotState) -> PlannerParams:
    _check_keys(
        obj, path,
        {
            "dt", "horizon_w", "mode", "cem_population", "cem_elites",
            "cem_iterations", "cem_init_std", "execute_steps", "goal_tolerance",
            "max_cycles",
        },
    )
    mode = _string(obj, path, "mode", "baseline")
    if mode not in ("baseline", "legible"):
        raise ScenarioError(f"{path}.mode", "must be 'baseline' or 'legible'")
    std_v = None
    std_omega = None
    if "cem_init_std" in obj:
        std_obj = _as_object(obj["cem_init_std"], f"{path}.cem_init_std")
        _check_keys(std_obj, f"{path}.cem_init_std", {"v", "omega_deg"})
        if "v" in std_obj:
            std_v = _number(std_obj, f"{path}.cem_init_std", "v")
            if std_v <= 0:
                raise ScenarioError(f"{path}.cem_init_std.v", "must be positive")
        if "omega_deg" in std_obj:
            std_omega = math.radians(_number(std_obj, f"{path}.cem_init_std", "omega_deg"))
            if std_omega <= 0:
                raise ScenarioError(f"{path}.cem_init_std.omega_deg", "must be positive")
    fields = dict(
        dt=_number(obj, path, "dt", 0.4),
        horizon_w=_integer(obj, path, "horizon_w", 12),
        mode=mode,
        cem_population=_integer(obj, path, "cem_population", 64),
        cem_elites=_integer(obj, path, "cem_elites", 8),
        cem_iterations=_integer(obj, path, "cem_iterations", 4),
        cem_init_std_v=std_v if std_v is not None else 0.5 * robot.v_max,
        cem_init_std_omega=std_omega if std_omega is not None else 0.5 * robot.omega_max,
        execute_steps=_integer(obj, path, "execute_steps", 1),
        goal_tolerance=_number(obj, path, "goal_tolerance", 0.3),
        max_cycles=_integer(obj, path, "max_cycles", 500),
    )
    try:
        return PlannerParams(**fields)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


def _parse_task_weights(obj: dict, path: str, robot: RobotState) -> TaskCostWeights:
    _check_keys(
        obj, path,
        {"w_goal", "w_clearance", "w_approach", "w_smooth", "w_speed", "d_safe", "v_pref"},
    )
    fields = dict(
        w_goal=_number(obj, path, "w_goal", 1.0),
        w_clearance=_number(obj, path, "w_clearance", 2.0),
        w_approach=_number(obj, path, "w_approach", 0.5),
        w_smooth=_number(obj, path, "w_smooth", 0.1),
        w_speed=_number(obj, path, "w_speed", 0.2),
        d_safe=_number(obj, path, "d_safe", 0.5),
        v_pref=_number(obj, path, "v_pref", 0.8 * robot.v_max),
    )
    try:
        return TaskCostWeights(**fields)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


def _parse_legibility(obj: dict, path: str) -> LegibilityParams:
    _check_keys(obj, path, {"lambda_sim", "lambda_fov", "h_max", "eps_v"})
    fields = dict(
        lambda_sim=_number(obj, path, "lambda_sim", 1.0),
        lambda_fov=_number(obj, path, "lambda_fov", 1.0),
        h_max=_number(obj, path, "h_max", 3.0),
        eps_v=_number(obj, path, "eps_v", 1e-6),
    )
    try:
        return LegibilityParams(**fields)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


def parse_scenario(data: bytes | str | dict) -> ScenarioSpec:
    """Parse and fully validate a scenario document.

    Accepts raw bytes, a JSON string or an already-decoded object. Raises
    ScenarioError naming the JSON path and the violated rule.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError:
            raise ScenarioError("$", "file is not valid UTF-8") from None
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ScenarioError("$", f"malformed JSON: {exc.msg} (line {exc.lineno})") from None
    doc = _as_object(data, "$")
    _check_keys(
        doc, "$",
        {"version", "robot", "goals", "observers", "obstacles", "planner",
         "task_weights", "legibility", "seed"},
    )
    version = _integer(doc, "$", "version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError("$.version", f"unsupported schema version {version}")

    if "robot" not in doc:
        raise ScenarioError("$.robot", "required key missing")
    robot = _parse_robot(_as_object(doc["robot"], "$.robot"), "$.robot")

    if "goals" not in doc:
        raise ScenarioError("$.goals", "required key missing")
    goals_raw = doc["goals"]
    if not isinstance(goals_raw, list) or not goals_raw:
        raise ScenarioError("$.goals", "must be a non-empty array")
    goals = tuple(
        _parse_goal(_as_object(g, f"$.goals[{i}]"), f"$.goals[{i}]")
        for i, g in enumerate(goals_raw)
    )

    observers_raw = doc.get("observers", [])
    if not isinstance(observers_raw, list):
        raise ScenarioError("$.observers", "must be an array")
    observers = tuple(
        _parse_observer(_as_object(o, f"$.observers[{i}]"), f"$.observers[{i}]")
        for i, o in enumerate(observers_raw)
    )

    obstacles_raw = doc.get("obstacles", [])
    if not isinstance(obstacles_raw, list):
        raise ScenarioError("$.obstacles", "must be an array")
    obstacles = tuple(
        _parse_obstacle(_as_object(o, f"$.obstacles[{i}]"), f"$.obstacles[{i}]")
        for i, o in enumerate(obstacles_raw)
    )

    planner = _parse_planner(_as_object(doc.get("planner", {}), "$.planner"), "$.planner", robot)
    weights = _parse_task_weights(
        _as_object(doc.get("task_weights", {}), "$.task_weights"), "$.task_weights", robot
    )
    legibility = _parse_legibility(
        _as_object(doc.get("legibility", {}), "$.legibility"), "$.legibility"
    )

    seed = _integer(doc, "$", "seed", 0)
    if not 0 <= seed < 2**64:
        raise ScenarioError("$.seed", "must be a 64-bit unsigned integer")

    spec = ScenarioSpec(
        robot=robot,
        goals=goals,
        observers=observers,
        obstacles=obstacles,
        planner=planner,
        task_weights=weights,
        legibility=legibility,
        seed=seed,
    )
    validate_spec(spec)
    return spec


def validate_spec(spec: ScenarioSpec) -> None:
    """Cross-field invariants that individual parsers cannot check."""
    targets = [g for g in spec.goals if g.is_target]
    if len(targets) != 1:
        raise ScenarioError("$.goals", "exactly one target goal required")
    ids = [g.id for g in spec.goals]
    if len(set(ids)) != len(ids):
        raise ScenarioError("$.goals", "goal ids must be unique")
    obs_ids = [o.id for o in spec.observers]
    if len(set(obs_ids)) != len(obs_ids):
        raise ScenarioError("$.observers", "observer ids must be unique")
    for i, obs in enumerate(spec.observers):
        if obs.attached_goal is not None and obs.attached_goal not in ids:
            raise ScenarioError(
                f"$.observers[{i}].attached_goal", f"references unknown goal id {obs.attached_goal!r}"
            )
    if clearance(spec.robot.position, spec.obstacles) < spec.robot.radius:
        raise ScenarioError("$.robot.position", "start clearance must be >= robot radius")
    for i, goal in enumerate(spec.goals):
        if clearance(goal.position, spec.obstacles) < spec.robot.radius:
            raise ScenarioError(
                f"$.goals[{i}].position", "goal clearance must be >= robot radius"
            )
    p = spec.planner
    # Worst-case stopping rule: the horizon must be long enough to shed v_max.
    if spec.robot.v_max > spec.robot.a_max * p.horizon_w * p.dt:
        raise ScenarioError("$.planner", "v_max must be <= a_max * horizon_w * dt")


def load_scenario(path: str) -> ScenarioSpec:
    with open(path, "rb") as fh:
        return parse_scenario(fh.read())


def serialize_scenario(spec: ScenarioSpec) -> dict:
    """Scenario document (JSON-ready dict) with every default materialized."""
    std_v = spec.planner.cem_init_std_v
    if std_v is None:
        std_v = 0.5 * spec.robot.v_max
    std_omega = spec.planner.cem_init_std_omega
    if std_omega is None:
        std_omega = 0.5 * spec.robot.omega_max
    return {
        "version": SCHEMA_VERSION,
        "robot": {
            "position": [spec.robot.position.x, spec.robot.position.y],
            "heading_deg": math.degrees(spec.robot.heading),
            "speed": spec.robot.speed,
            "radius": spec.robot.radius,
            "v_max": spec.robot.v_max,
            "a_max": spec.robot.a_max,
            "omega_max_deg": math.degrees(spec.robot.omega_max),
        },
        "goals": [
            {"id": g.id, "position": [g.position.x, g.position.y], "is_target": g.is_target}
            for g in spec.goals
        ],
        "observers": [
            {
                "id": o.id,
                "position": [o.position.x, o.position.y],
                "heading_deg": math.degrees(o.heading),
                "fov_deg": math.degrees(o.fov),
                "attached_goal": o.attached_goal,
            }
            for o in spec.observers
        ],
        "obstacles": [
            {
                "type": "circle",
                "center": [o.center.x, o.center.y],
                "radius": o.radius,
            }
            if isinstance(o, CircleObstacle)
            else {
                "type": "rect",
                "min": [o.min.x, o.min.y],
                "max": [o.max.x, o.max.y],
            }
            for o in spec.obstacles
        ],
        "planner": {
            "dt": spec.planner.dt,
            "horizon_w": spec.planner.horizon_w,
            "mode": spec.planner.mode,
            "cem_population": spec.planner.cem_population,
            "cem_elites": spec.planner.cem_elites,
            "cem_iterations": spec.planner.cem_iterations,
            "cem_init_std": {
                "v": std_v,
                "omega_deg": math.degrees(std_omega),
            },
            "execute_steps": spec.planner.execute_steps,
            "goal_tolerance": spec.planner.goal_tolerance,
            "max_cycles": spec.planner.max_cycles,
        },
        "task_weights": {
            "w_goal": spec.task_weights.w_goal,
            "w_clearance": spec.task_weights.w_clearance,
            "w_approach": spec.task_weights.w_approach,
            "w_smooth": spec.task_weights.w_smooth,
            "w_speed": spec.task_weights.w_speed,
            "d_safe": spec.task_weights.d_safe,
            "v_pref": spec.task_weights.v_pref,
        },
        "legibility": {
            "lambda_sim": spec.legibility.lambda_sim,
            "lambda_fov": spec.legibility.lambda_fov,
            "h_max": spec.legibility.h_max,
            "eps_v": spec.legibility.eps_v,
        },
        "seed": spec.seed,
    }


def scenario_to_bytes(spec: ScenarioSpec) -> bytes:
    return (json.dumps(serialize_scenario(spec), indent=2, sort_keys=True) + "\n").encode("utf-8")


def simulation_rows(sim: SimulationResult, spec: ScenarioSpec) -> list[tuple]:
    """Log rows (t, x, y, heading, v, omega, clearance), one per cycle.

    Row 0 is the initial state; each subsequent row is the state after a
    cycle's executed controls (so t advances by dt * execute_steps). The v
    and omega columns hold the last applied control.
    """
    dt = spec.planner.dt
    stride = spec.planner.execute_steps
    n_steps = sim.executed.waypoints.shape[0] - 1
    indices = list(range(0, n_steps + 1, stride))
    if indices[-1] != n_steps:
        indices.append(n_steps)  # partial final cycle (stopped at the goal)
    rows = []
    for idx in indices:
        pos = sim.executed.waypoints[idx]
        if idx == 0:
            v, omega = spec.robot.speed, 0.0
        else:
            v, omega = sim.controls[idx - 1]
        rows.append(
            (
                idx * dt,
                float(pos[0]),
                float(pos[1]),
                float(sim.headings[idx]),
                float(v),
                float(omega),
                clearance(Point2(float(pos[0]), float(pos[1])), spec.obstacles),
            )
        )
    return rows


def plan_rows(
    trajectory: Trajectory,
    headings: np.ndarray,
    controls: np.ndarray,
    initial_speed: float,
    spec: ScenarioSpec,
) -> list[tuple]:
    """Log rows for a single planned horizon (one row per waypoint)."""
    rows = []
    for idx, pos in enumerate(trajectory.waypoints):
        if idx == 0:
            v, omega = initial_speed, 0.0
        else:
            v, omega = controls[idx - 1]
        rows.append(
            (
                idx * trajectory.dt,
                float(pos[0]),
                float(pos[1]),
                float(headings[idx]),
                float(v),
                float(omega),
                clearance(Point2(float(pos[0]), float(pos[1])), spec.obstacles),
            )
        )
    return rows


def format_trajectory_csv(rows: list[tuple]) -> str:
    """Render log rows: t with 6 decimals, other floats with 9 significant digits."""
    lines = [CSV_HEADER]
    for t, x, y, heading, v, omega, clr in rows:
        lines.append(
            f"{t:.6f},{x:.9g},{y:.9g},{heading:.9g},{v:.9g},{omega:.9g},{clr:.9g}"
        )
    return "\n".join(lines) + "\n"


def write_trajectory_csv(path: str, rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trajectory_csv(rows))


def read_trajectory_csv(data: str | bytes) -> tuple[Trajectory, dict[str, np.ndarray]]:
    """Parse a trajectory log back into a Trajectory plus its raw columns."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = [line for line in data.splitlines() if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"trajectory CSV must start with header {CSV_HEADER!r}")
    values = np.array(
        [[float(cell) for cell in line.split(",")] for line in lines[1:]], dtype=float
    )
    if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] != 7:
        raise ValueError("trajectory CSV needs at least two data rows of 7 columns")
    t = values[:, 0]
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ValueError("trajectory CSV rows must be strictly increasing in t")
    columns = {
        name: values[:, i]
        for i, name in enumerate(["t", "x", "y", "heading", "v", "omega", "clearance"])
    }
    return Trajectory(values[:, 1:3], float(steps[0])), columns


def load_trajectory_csv(path: str) -> tuple[Trajectory, dict[str, np.ndarray]]:
    with open(path, "r", encoding="utf-8") as fh:
        return read_trajectory_csv(fh.read())
