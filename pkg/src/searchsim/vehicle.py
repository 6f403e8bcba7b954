"""Agent dynamics and the waypoint-tracking controller used for trajectory prediction.

A 2D double integrator with per-axis velocity and input clamps stands in for
the real vehicle; a PD law tracks waypoints. Trajectory prediction rolls the
closed loop until arrival, yielding the step count and control inputs the
long-horizon planner scores.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class AgentState:
    position: np.ndarray  # (2,) meters
    velocity: np.ndarray  # (2,) m/s

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(2)

    @classmethod
    def at_rest(cls, position) -> "AgentState":
        return cls(np.asarray(position, dtype=float), np.zeros(2))

    def copy(self) -> "AgentState":
        return AgentState(self.position.copy(), self.velocity.copy())


@dataclass(frozen=True)
class ControllerConfig:
    kp: float = 0.8            # 1/s^2
    kd: float = 1.8            # 1/s
    v_max: float = 4.0         # m/s
    u_max: float = 3.0         # m/s^2
    ts: float = 0.005          # s
    arrival_radius: float = 1.0  # m
    max_steps: int = 20_000

    def __post_init__(self):
        for name in ("kp", "kd", "v_max", "u_max", "ts", "arrival_radius", "max_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Closed-loop rollout toward a waypoint.

    ``positions``/``velocities`` hold the K post-step states, ``inputs`` the K
    applied accelerations; ``arrived`` is False when the rollout hit max_steps.
    """

    positions: np.ndarray   # (K, 2)
    velocities: np.ndarray  # (K, 2)
    inputs: np.ndarray      # (K, 2)
    arrived: bool

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def end_state(self) -> AgentState | None:
        if len(self.inputs) == 0:
            return None
        return AgentState(self.positions[-1].copy(), self.velocities[-1].copy())


def step(state: AgentState, u, cfg: ControllerConfig) -> AgentState:
    """One Euler step of the clamped double integrator."""
    ux = min(max(float(u[0]), -cfg.u_max), cfg.u_max)
    uy = min(max(float(u[1]), -cfg.u_max), cfg.u_max)
    vx = min(max(state.velocity[0] + ux * cfg.ts, -cfg.v_max), cfg.v_max)
    vy = min(max(state.velocity[1] + uy * cfg.ts, -cfg.v_max), cfg.v_max)
    return AgentState(
        np.array([state.position[0] + vx * cfg.ts, state.position[1] + vy * cfg.ts]),
        np.array([vx, vy]),
    )


def track_waypoint(state: AgentState, waypoint, cfg: ControllerConfig) -> np.ndarray:
    """PD tracking law, clamped per axis to the input limit."""
    ux = cfg.kp * (float(waypoint[0]) - state.position[0]) - cfg.kd * state.velocity[0]
    uy = cfg.kp * (float(waypoint[1]) - state.position[1]) - cfg.kd * state.velocity[1]
    ux = min(max(ux, -cfg.u_max), cfg.u_max)
    uy = min(max(uy, -cfg.u_max), cfg.u_max)
    return np.array([ux, uy])


def predict_trajectory(state: AgentState, waypoint, cfg: ControllerConfig) -> Trajectory:
    """Roll the tracking loop until within the arrival radius or max_steps.

    Deterministic; a non-arriving rollout is returned truncated with
    ``arrived=False`` so the planner may still score it.
    """
    wx, wy = float(waypoint[0]), float(waypoint[1])
    px, py = float(state.position[0]), float(state.position[1])
    vx, vy = float(state.velocity[0]), float(state.velocity[1])
    kp, kd = cfg.kp, cfg.kd
    u_max, v_max, ts = cfg.u_max, cfg.v_max, cfg.ts
    arrive_sq = cfg.arrival_radius * cfg.arrival_radius

    xs, ys, vxs, vys, uxs, uys = [], [], [], [], [], []
    arrived = (wx - px) ** 2 + (wy - py) ** 2 <= arrive_sq
    for _ in range(cfg.max_steps):
        if arrived:
            break
        ux = kp * (wx - px) - kd * vx
        uy = kp * (wy - py) - kd * vy
        ux = u_max if ux > u_max else (-u_max if ux < -u_max else ux)
        uy = u_max if uy > u_max else (-u_max if uy < -u_max else uy)
        vx += ux * ts
        vy += uy * ts
        vx = v_max if vx > v_max else (-v_max if vx < -v_max else vx)
        vy = v_max if vy > v_max else (-v_max if vy < -v_max else vy)
        px += vx * ts
        py += vy * ts
        uxs.append(ux)
        uys.append(uy)
        xs.append(px)
        ys.append(py)
        vxs.append(vx)
        vys.append(vy)
        arrived = (wx - px) ** 2 + (wy - py) ** 2 <= arrive_sq

    return Trajectory(
        positions=np.column_stack([xs, ys]) if xs else np.empty((0, 2)),
        velocities=np.column_stack([vxs, vys]) if xs else np.empty((0, 2)),
        inputs=np.column_stack([uxs, uys]) if xs else np.empty((0, 2)),
        arrived=bool(arrived),
    )


def control_cost(trajectory: Trajectory) -> float:
    """Summed squared control effort, sum_j u_j^T u_j."""
    return float(np.sum(trajectory.inputs * trajectory.inputs))
