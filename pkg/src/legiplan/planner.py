"""Receding-horizon sampling planner.

Candidates are unicycle control sequences (v, omega) optimized with the
cross-entropy method. Every cycle the planner first predicts, per goal, the
local path an observer would expect (a pure task-cost optimization), then in
legible mode runs a second optimization of the combined objective with those
predictions held fixed.

Randomness is counter-based: each candidate's draws come from a Philox
stream keyed by (seed, iteration, candidate index), so results are identical
regardless of evaluation order or the LEGIPLAN_THREADS worker count.
"""
from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .legibility import (
    PredictedPathSet,
    designated_observer,
    fov_cost_batch,
    legibility_aware_cost,
    weighted_similarity_batch,
)
from .model import Point2, RobotState, ScenarioSpec, Trajectory, wrap_angle
from .task_cost import COLLISION_COST, CostBreakdown, task_cost, task_cost_batch

_SEED_MODULUS = 2**64
_STD_FLOOR = 1e-3  # keeps the sampling distribution from collapsing

_MODES = ("baseline", "legible")


class PlannerFailure(RuntimeError):
    """Raised when every candidate stays in collision.

    Carries the best breakdown seen, and in closed-loop runs the partial
    simulation log up to the failing cycle.
    """

    def __init__(self, message: str, breakdown=None, partial=None):
        super().__init__(message)
        self.breakdown = breakdown
        self.partial = partial


@dataclass(frozen=True)
class PlannerParams:
    """Horizon, mode and cross-entropy optimizer settings."""

    dt: float = 0.4  # s
    horizon_w: int = 12  # steps per plan
    mode: str = "baseline"  # "baseline" | "legible"
    cem_population: int = 64
    cem_elites: int = 8
    cem_iterations: int = 4
    cem_init_std_v: float | None = None  # m/s, default 0.5 * v_max
    cem_init_std_omega: float | None = None  # rad/s, default 0.5 * omega_max
    execute_steps: int = 1
    goal_tolerance: float = 0.3  # m
    max_cycles: int = 500

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon_w < 2:
            raise ValueError("horizon_w must be >= 2")
        if self.cem_population < 8:
            raise ValueError("cem_population must be >= 8")
        if not 2 <= self.cem_elites <= self.cem_population:
            raise ValueError("cem_elites must be in [2, cem_population]")
        if self.cem_iterations < 1:
            raise ValueError("cem_iterations must be >= 1")
        if not 1 <= self.execute_steps <= self.horizon_w:
            raise ValueError("execute_steps must be in [1, horizon_w]")
        if self.goal_tolerance <= 0:
            raise ValueError("goal_tolerance must be positive")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")


@dataclass(frozen=True)
class ControlSequence:
    """Unicycle controls, shape (horizon_w, 2) with columns (v, omega)."""

    controls: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.controls, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
            raise ValueError(f"controls must have shape (w, 2), got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "controls", arr)

    def respects(self, state: RobotState, dt: float) -> bool:
        """Check the kinodynamic bounds used by the sampler."""
        v = self.controls[:, 0]
        om = self.controls[:, 1]
        if np.any(v < 0) or np.any(v > state.v_max) or np.any(np.abs(om) > state.omega_max):
            return False
        dv = np.abs(np.diff(np.concatenate([[state.speed], v])))
        return bool(np.all(dv <= state.a_max * dt + 1e-12))


@dataclass(frozen=True)
class PlanResult:
    trajectory: Trajectory
    breakdown: CostBreakdown
    predictions: PredictedPathSet
    cycles_used: int
    reached: bool
    controls: ControlSequence


@dataclass(frozen=True)
class SimulationResult:
    """Closed-loop run: per-cycle plans plus the executed path."""

    plan_results: tuple[PlanResult, ...]
    executed: Trajectory
    headings: np.ndarray  # heading at each executed waypoint
    controls: np.ndarray  # (n_steps, 2) applied (v, omega)
    reached: bool
    cycles_used: int


def worker_count() -> int:
    """Worker cap from LEGIPLAN_THREADS (default 1). Results never depend on it."""
    raw = os.environ.get("LEGIPLAN_THREADS", "").strip()
    if not raw:
        return 1
    count = int(raw)
    if count < 1:
        raise ValueError(f"LEGIPLAN_THREADS must be a positive integer, got {raw!r}")
    return min(count, 64)


_EXECUTORS: dict[int, ThreadPoolExecutor] = {}


def _executor(workers: int) -> ThreadPoolExecutor:
    pool = _EXECUTORS.get(workers)
    if pool is None:
        pool = ThreadPoolExecutor(max_workers=workers)
        _EXECUTORS[workers] = pool
    return pool


def _score_chunked(
    objective: Callable[[np.ndarray], np.ndarray], waypoints: np.ndarray, workers: int
) -> np.ndarray:
    """Evaluate a population in contiguous chunks, one per worker.

    Each candidate is scored independently, so the chunking (and thread
    scheduling) cannot change any result.
    """
    n = waypoints.shape[0]
    if workers <= 1 or n < 2 * workers:
        return np.asarray(objective(waypoints), dtype=float)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    out = np.empty(n, dtype=float)
    pool = _executor(workers)
    futures = [
        (lo, hi, pool.submit(objective, waypoints[lo:hi]))
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    for lo, hi, fut in futures:
        out[lo:hi] = fut.result()
    return out


def _candidate_rng(seed: int, iteration: int, candidate: int) -> np.random.Generator:
    key = np.array([seed % _SEED_MODULUS, (iteration << 32) | candidate], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_noise(seed: int, iteration: int, population: int, horizon: int) -> np.ndarray:
    z = np.empty((population, horizon, 2), dtype=float)
    for i in range(population):
        z[i] = _candidate_rng(seed, iteration, i).standard_normal((horizon, 2))
    return z


def _clip_controls(raw: np.ndarray, state: RobotState, dt: float) -> np.ndarray:
    """Clip sampled controls to speed, accel and turn-rate bounds.

    The speed channel is clipped sequentially so |v_t - v_{t-1}| <= a_max*dt
    holds along the whole sequence, starting from the current speed.
    """
    n, w, _ = raw.shape
    v = np.empty((n, w), dtype=float)
    prev = np.full(n, state.speed, dtype=float)
    for t in range(w):
        lo = np.maximum(0.0, prev - state.a_max * dt)
        hi = np.minimum(state.v_max, prev + state.a_max * dt)
        v[:, t] = np.clip(raw[:, t, 0], lo, hi)
        prev = v[:, t]
    om = np.clip(raw[:, :, 1], -state.omega_max, state.omega_max)
    return np.stack([v, om], axis=2)


def _rollout_batch(state: RobotState, controls: np.ndarray, dt: float) -> np.ndarray:
    """Forward-integrate unicycle controls, shape (n, w, 2) -> (n, w+1, 2).

    Heading updates before displacement: theta_{t+1} = theta_t + omega_t*dt,
    q_{t+1} = q_t + v_t*dt*(cos theta_{t+1}, sin theta_{t+1}).
    """
    v = controls[:, :, 0]
    om = controls[:, :, 1]
    theta = state.heading + np.cumsum(om * dt, axis=1)
    step = v * dt
    dx = step * np.cos(theta)
    dy = step * np.sin(theta)
    n, w = v.shape
    waypoints = np.empty((n, w + 1, 2), dtype=float)
    waypoints[:, 0, 0] = state.position.x
    waypoints[:, 0, 1] = state.position.y
    waypoints[:, 1:, 0] = state.position.x + np.cumsum(dx, axis=1)
    waypoints[:, 1:, 1] = state.position.y + np.cumsum(dy, axis=1)
    return waypoints


def _rollout_headings(state: RobotState, controls: np.ndarray, dt: float) -> np.ndarray:
    """Heading at each waypoint of a single rollout, shape (w+1,)."""
    return np.concatenate([[state.heading], state.heading + np.cumsum(controls[:, 1] * dt)])


def rollout(state: RobotState, controls: ControlSequence, dt: float) -> Trajectory:
    """Trajectory traced by one control sequence from the given state."""
    waypoints = _rollout_batch(state, controls.controls[np.newaxis], dt)[0]
    return Trajectory(waypoints, dt)


def _initial_mean(
    state: RobotState, horizon: int, dt: float, v_pref: float, goal: Point2
) -> np.ndarray:
    """Deterministic initial sampling mean: ramp toward cruise speed, no turning.

    Near the goal the target speed drops to what covers the remaining
    distance within the horizon, so braking plans are sampled early.
    """
    distance = state.position.distance_to(goal)
    v_target = min(v_pref, distance / (horizon * dt))
    mean = np.zeros((horizon, 2), dtype=float)
    prev = state.speed
    for t in range(horizon):
        lo = max(0.0, prev - state.a_max * dt)
        hi = min(state.v_max, prev + state.a_max * dt)
        prev = min(max(v_target, lo), hi)
        mean[t, 0] = prev
    return mean


@dataclass
class _CEMResult:
    controls: np.ndarray  # (w, 2) best sequence ever seen
    waypoints: np.ndarray  # (w+1, 2) its rollout
    cost: float
    final_mean: np.ndarray  # (w, 2) fitted mean after the last iteration
    best_cost_history: list[float]  # best-ever cost after each iteration


def _cem_optimize(
    objective: Callable[[np.ndarray], np.ndarray],
    state: RobotState,
    params: PlannerParams,
    rng_seed: int,
    init_mean: np.ndarray,
    init_std: np.ndarray,
    warm_controls: np.ndarray | None = None,
) -> _CEMResult:
    """Cross-entropy search over control sequences.

    Tracks the best candidate ever scored; a warm-start sequence, when
    given, is scored under the current objective and seeds that tracker.
    """
    workers = worker_count()
    mean = init_mean.copy()
    std = init_std.copy()
    best_cost = math.inf
    best_controls = None
    best_waypoints = None
    if warm_controls is not None:
        wp = _rollout_batch(state, warm_controls[np.newaxis], params.dt)
        best_cost = float(objective(wp)[0])
        best_controls = warm_controls.copy()
        best_waypoints = wp[0]
    history: list[float] = []
    for iteration in range(params.cem_iterations):
        z = _draw_noise(rng_seed, iteration, params.cem_population, params.horizon_w)
        controls = _clip_controls(mean + std * z, state, params.dt)
        waypoints = _rollout_batch(state, controls, params.dt)
        costs = _score_chunked(objective, waypoints, workers)
        idx = int(np.argmin(costs))
        if costs[idx] < best_cost:
            best_cost = float(costs[idx])
            best_controls = controls[idx].copy()
            best_waypoints = waypoints[idx].copy()
        elite_idx = np.argsort(costs, kind="stable")[: params.cem_elites]
        elites = controls[elite_idx]
        mean = elites.mean(axis=0)
        std = np.maximum(elites.std(axis=0), _STD_FLOOR)
        history.append(best_cost)
    return _CEMResult(best_controls, best_waypoints, best_cost, mean, history)


def _resolved_init_std(robot: RobotState, params: PlannerParams) -> np.ndarray:
    std_v = params.cem_init_std_v if params.cem_init_std_v is not None else 0.5 * robot.v_max
    std_om = (
        params.cem_init_std_omega
        if params.cem_init_std_omega is not None
        else 0.5 * robot.omega_max
    )
    return np.array([std_v, std_om], dtype=float)


def _task_objective(scenario: ScenarioSpec, goal_xy: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def objective(waypoints: np.ndarray) -> np.ndarray:
        return task_cost_batch(
            waypoints,
            scenario.planner.dt,
            goal_xy,
            scenario.obstacles,
            scenario.robot.radius,
            scenario.task_weights,
        )["total"]

    return objective


def _legible_objective(
    scenario: ScenarioSpec, predictions: PredictedPathSet
) -> Callable[[np.ndarray], np.ndarray]:
    """Combined objective with the predicted paths held fixed."""
    dt = scenario.planner.dt
    leg = scenario.legibility
    observer = designated_observer(scenario)
    g_star = scenario.target_goal()
    g_star_xy = g_star.position.as_array()
    pred_vel = {}
    for goal in scenario.goals:
        diffs = np.diff(predictions[goal.id].waypoints, axis=0) / dt
        pred_vel[goal.id] = np.vstack([diffs, diffs[-1:]])

    def objective(waypoints: np.ndarray) -> np.ndarray:
        task = task_cost_batch(
            waypoints, dt, g_star_xy, scenario.obstacles, scenario.robot.radius,
            scenario.task_weights,
        )
        step_v = np.diff(waypoints, axis=1) / dt
        cand_vel = np.concatenate([step_v, step_v[:, -1:]], axis=1)
        sim = np.zeros(waypoints.shape[0], dtype=float)
        for goal in scenario.goals:
            term = weighted_similarity_batch(
                waypoints, cand_vel, pred_vel[goal.id], goal.position.as_array(),
                g_star_xy, observer, leg,
            )
            sim += -term if goal.is_target else term
        fov = fov_cost_batch(waypoints, observer)
        total = task["total"] + leg.lambda_sim * sim + leg.lambda_fov * fov
        return np.where(task["collided"], COLLISION_COST, total)

    return objective


def plan_once(scenario: ScenarioSpec, rng_seed: int | None = None) -> PlanResult:
    """One planning cycle: per-goal predictions, then the mode's objective.

    Baseline mode returns the target-goal prediction directly. Legible mode
    runs a second optimization of the combined cost, warm-started from the
    target prediction's control distribution; when both lambda weights are
    zero that objective coincides with the task cost, so the target
    prediction is returned unchanged.
    """
    if not scenario.goals:
        raise ValueError("scenario must contain at least one goal")
    params = scenario.planner
    robot = scenario.robot
    seed = scenario.seed if rng_seed is None else rng_seed
    init_std = np.broadcast_to(
        _resolved_init_std(robot, params), (params.horizon_w, 2)
    ).copy()

    predictions: PredictedPathSet = {}
    cem_results: dict[str, _CEMResult] = {}
    for goal in scenario.goals:
        res = _cem_optimize(
            _task_objective(scenario, goal.position.as_array()),
            robot,
            params,
            seed,
            _initial_mean(
                robot, params.horizon_w, params.dt, scenario.task_weights.v_pref, goal.position
            ),
            init_std,
        )
        cem_results[goal.id] = res
        predictions[goal.id] = Trajectory(res.waypoints, params.dt)

    g_star = scenario.target_goal()
    base = cem_results[g_star.id]
    leg = scenario.legibility
    legible_active = params.mode == "legible" and (leg.lambda_sim > 0 or leg.lambda_fov > 0)
    if legible_active:
        chosen = _cem_optimize(
            _legible_objective(scenario, predictions),
            robot,
            params,
            seed,
            base.final_mean,
            init_std,
            warm_controls=base.controls,
        )
    else:
        chosen = base

    trajectory = Trajectory(chosen.waypoints, params.dt)
    if params.mode == "legible":
        breakdown = legibility_aware_cost(
            trajectory,
            g_star.position,
            predictions,
            scenario.goals,
            designated_observer(scenario),
            scenario.obstacles,
            robot,
            scenario.task_weights,
            leg,
        )
    else:
        breakdown = task_cost(
            trajectory, g_star.position, scenario.obstacles, robot, scenario.task_weights
        )
    if breakdown.collided:
        raise PlannerFailure(
            "no collision-free candidate found", breakdown=breakdown
        )
    reached = trajectory.end.distance_to(g_star.position) <= params.goal_tolerance
    return PlanResult(
        trajectory=trajectory,
        breakdown=breakdown,
        predictions=predictions,
        cycles_used=1,
        reached=reached,
        controls=ControlSequence(chosen.controls),
    )


def run_closed_loop(scenario: ScenarioSpec) -> SimulationResult:
    """Plan, execute the first controls, replan; stop at the goal or the
    cycle budget.

    Cycle i reseeds the optimizer with (seed + i) mod 2^64, which makes the
    whole run a pure function of the scenario.
    """
    params = scenario.planner
    robot = scenario.robot
    g_star = scenario.target_goal()

    positions = [robot.position.as_array()]
    headings = [robot.heading]
    controls_log: list[np.ndarray] = []
    plan_results: list[PlanResult] = []
    reached = robot.position.distance_to(g_star.position) <= params.goal_tolerance
    cycles = 0

    state = robot
    while not reached and cycles < params.max_cycles:
        cycle_scenario = dataclasses.replace(scenario, robot=state)
        cycle_seed = (scenario.seed + cycles) % _SEED_MODULUS
        try:
            result = plan_once(cycle_scenario, rng_seed=cycle_seed)
        except PlannerFailure as failure:
            failure.partial = _finish_simulation(
                plan_results, positions, headings, controls_log, params, False, cycles
            )
            raise
        plan_results.append(result)

        controls = result.controls.controls
        step_headings = _rollout_headings(state, controls, params.dt)
        for k in range(params.execute_steps):
            pos = result.trajectory.waypoints[k + 1]
            heading = wrap_angle(float(step_headings[k + 1]))
            positions.append(pos)
            headings.append(heading)
            controls_log.append(controls[k].copy())
            state = RobotState(
                position=Point2(float(pos[0]), float(pos[1])),
                heading=heading,
                speed=float(controls[k, 0]),
                radius=robot.radius,
                v_max=robot.v_max,
                a_max=robot.a_max,
                omega_max=robot.omega_max,
            )
            if state.position.distance_to(g_star.position) <= params.goal_tolerance:
                reached = True
                break
        cycles += 1

    return _finish_simulation(
        plan_results, positions, headings, controls_log, params, reached, cycles
    )


def _finish_simulation(
    plan_results: list[PlanResult],
    positions: list[np.ndarray],
    headings: list[float],
    controls_log: list[np.ndarray],
    params: PlannerParams,
    reached: bool,
    cycles: int,
) -> SimulationResult:
    if len(positions) == 1:
        # Degenerate run (started at the goal): duplicate the start so the
        # executed path is still a valid trajectory.
        positions = positions + [positions[0]]
        headings = headings + [headings[0]]
    executed = Trajectory(np.vstack(positions), params.dt)
    controls = (
        np.vstack(controls_log) if controls_log else np.zeros((0, 2), dtype=float)
    )
    return SimulationResult(
        plan_results=tuple(plan_results),
        executed=executed,
        headings=np.array(headings, dtype=float),
        controls=controls,
        reached=reached,
        cycles_used=cycles,
    )
