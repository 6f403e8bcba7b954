"""Candidate-waypoint generation and the model-based selection objectives.

Two planners share the cluster-based refinement signal: the short-step planner
scores each radial candidate by the summed detection probability of the
estimated target centers seen from it, while the long-horizon variant rolls a
predicted trajectory to each grid candidate and trades summed control effort
against detection opportunities at periodic measurement points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .phd import Cluster
from .sensing import SensorConfig, detection_prob
from .vehicle import AgentState, ControllerConfig, Trajectory, control_cost, predict_trajectory
from .world import Environment

_DEDUP_TOL = 1e-9
ALLOWED_DIRECTION_COUNTS = (4, 8, 16, 32)


class PlannerError(RuntimeError):
    """No scoreable candidate is available."""


@dataclass(frozen=True)
class CandidateSet:
    waypoints: np.ndarray  # (W, 2), clamped inside the environment
    provenance: str        # e.g. "radial(n=8,r=9)" or "grid(spacing=80)"

    def __post_init__(self):
        object.__setattr__(self, "waypoints",
                           np.asarray(self.waypoints, dtype=float).reshape(-1, 2))
        if len(self.waypoints) == 0:
            raise ValueError("candidate set must be non-empty")

    def __len__(self) -> int:
        return len(self.waypoints)


@dataclass
class PlannerDecision:
    chosen: np.ndarray        # (2,)
    scores: np.ndarray        # (W,), aligned with the candidate set
    index: int
    trajectory: Trajectory | None = None
    non_arrival: bool = False


def as_candidates(agent_pos, n_dirs: int = 8, radius: float = 9.0,
                  env: Environment = Environment()) -> CandidateSet:
    """Evenly spaced radial candidates around the agent, clamped and deduplicated.

    Candidates that clamp onto each other or onto the agent position are
    removed, so corner positions may yield fewer than ``n_dirs`` waypoints.
    """
    if n_dirs not in ALLOWED_DIRECTION_COUNTS:
        raise ValueError(f"n_dirs must be one of {ALLOWED_DIRECTION_COUNTS}")
    if radius <= 0:
        raise ValueError("radius must be positive")
    agent = np.asarray(agent_pos, dtype=float)
    angles = 2.0 * math.pi * np.arange(n_dirs) / n_dirs
    raw = agent + radius * np.column_stack([np.cos(angles), np.sin(angles)])
    clamped = env.clamp(raw)

    kept: list[np.ndarray] = []
    for wp in clamped:
        if np.hypot(*(wp - agent)) <= _DEDUP_TOL:
            continue
        if any(np.hypot(*(wp - other)) <= _DEDUP_TOL for other in kept):
            continue
        kept.append(wp)
    if not kept:
        raise PlannerError("all radial candidates degenerate to the agent position")
    return CandidateSet(np.stack(kept), provenance=f"radial(n={n_dirs},r={radius:g})")


def asi_candidates(env: Environment, spacing: float = 80.0,
                   origin=(10.0, 10.0)) -> CandidateSet:
    """Axis-aligned waypoint grid from ``origin``.

    Grid points keep one full spacing of clearance to the far boundary, which
    reproduces the candidate counts 9 / 16 / 36 / 144 for spacings
    80 / 60 / 40 / 20 m in a 260 m environment.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    ox, oy = float(origin[0]), float(origin[1])
    xs = np.arange(ox, env.width - spacing + _DEDUP_TOL, spacing)
    ys = np.arange(oy, env.height - spacing + _DEDUP_TOL, spacing)
    if len(xs) == 0 or len(ys) == 0:
        raise PlannerError("spacing too large for the environment")
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    waypoints = np.column_stack([gx.ravel(), gy.ravel()])
    return CandidateSet(waypoints, provenance=f"grid(spacing={spacing:g})")


def as_score(candidate, clusters: Sequence[Cluster], sensor: SensorConfig) -> float:
    """Summed detection probability of every cluster center seen from the candidate."""
    cx, cy = float(candidate[0]), float(candidate[1])
    inv_fx, inv_fy = 1.0 / sensor.fov_x, 1.0 / sensor.fov_y
    total = 0.0
    for cluster in clusters:
        dx = (cluster.center[0] - cx) * inv_fx
        dy = (cluster.center[1] - cy) * inv_fy
        total += math.exp(-0.5 * math.hypot(dx, dy))
    return sensor.gain * total


def as_select(agent_pos, clusters: Sequence[Cluster], candidates: CandidateSet,
              sensor: SensorConfig) -> PlannerDecision:
    """Argmax of :func:`as_score`; ties break toward the lowest candidate index."""
    scores = np.array([as_score(wp, clusters, sensor) for wp in candidates.waypoints])
    index = int(np.argmax(scores))
    return PlannerDecision(chosen=candidates.waypoints[index].copy(),
                           scores=scores, index=index)


def asi_objective(cost: float, refinement: float, n_steps: int, beta: float) -> float:
    """Per-step tradeoff ``(-cost + beta * refinement) / n_steps``."""
    if n_steps <= 0:
        raise ValueError("n_steps must be positive")
    return (-cost + beta * refinement) / n_steps


def refinement_along(trajectory: Trajectory, start: AgentState,
                     clusters: Sequence[Cluster], sensor: SensorConfig,
                     delta: int) -> float:
    """Summed cluster detection probability at measurement points every ``delta`` steps.

    Point 0 is the current position; ceil(K / delta) points are used in total.
    """
    if not clusters:
        return 0.0
    k_steps = len(trajectory)
    n_points = max(1, math.ceil(k_steps / delta)) if k_steps > 0 else 1
    points = np.empty((n_points, 2))
    points[0] = start.position
    for m in range(1, n_points):
        points[m] = trajectory.positions[m * delta - 1]
    total = 0.0
    for cluster in clusters:
        total += float(np.sum(detection_prob(cluster.center, points, sensor)))
    return total


def asi_score(candidate, state: AgentState, clusters: Sequence[Cluster],
              sensor: SensorConfig, beta: float, delta: int,
              cfg: ControllerConfig) -> tuple[float, Trajectory]:
    """Score one grid candidate by rolling the tracking controller toward it."""
    trajectory = predict_trajectory(state, candidate, cfg)
    k_steps = len(trajectory)
    if k_steps == 0:
        raise PlannerError("candidate coincides with the current position")
    cost = control_cost(trajectory)
    refinement = refinement_along(trajectory, state, clusters, sensor, delta)
    return asi_objective(cost, refinement, k_steps, beta), trajectory


def asi_select(state: AgentState, clusters: Sequence[Cluster],
               candidates: CandidateSet, sensor: SensorConfig,
               beta: float = 100.0, delta: int = 10,
               cfg: ControllerConfig = ControllerConfig()) -> PlannerDecision:
    """Argmax of :func:`asi_score` over reachable candidates (lowest-index ties).

    Candidates within the arrival radius of the current position would yield
    zero-length trajectories and are excluded from scoring.
    """
    scores = np.full(len(candidates), -np.inf)
    trajectories: dict[int, Trajectory] = {}
    for i, wp in enumerate(candidates.waypoints):
        if np.hypot(*(wp - state.position)) <= cfg.arrival_radius:
            continue
        score, trajectory = asi_score(wp, state, clusters, sensor, beta, delta, cfg)
        scores[i] = score
        trajectories[i] = trajectory
    if not trajectories:
        raise PlannerError("no candidate outside the arrival radius")
    index = int(np.argmax(scores))
    trajectory = trajectories[index]
    return PlannerDecision(chosen=candidates.waypoints[index].copy(), scores=scores,
                           index=index, trajectory=trajectory,
                           non_arrival=not trajectory.arrived)
