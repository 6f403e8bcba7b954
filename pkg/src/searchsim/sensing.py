"""Probabilistic detection, noisy range-bearing measurements, and confirmed-target gating."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .world import Environment

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    return np.pi - (np.pi - theta) % TWO_PI


@dataclass(frozen=True)
class SensorConfig:
    """Omnidirectional range-bearing sensor.

    ``gain`` is the peak detection probability, ``fov_x``/``fov_y`` the
    field-of-view normalizers of the detection falloff, and ``sigma_range`` /
    ``sigma_bearing`` the measurement noise standard deviations (so the noise
    covariance is diag[sigma_range^2, sigma_bearing^2]).
    """

    gain: float = 0.98
    fov_x: float = 25.0
    fov_y: float = 25.0
    sigma_range: float = math.sqrt(1.5)
    sigma_bearing: float = math.sqrt(0.175)

    def __post_init__(self):
        if not (0.0 < self.gain <= 1.0):
            raise ValueError("gain must be in (0, 1]")
        if self.fov_x <= 0 or self.fov_y <= 0:
            raise ValueError("field-of-view normalizers must be positive")
        if self.sigma_range <= 0 or self.sigma_bearing <= 0:
            raise ValueError("noise standard deviations must be positive")

    @classmethod
    def from_variances(cls, var_range: float = 1.5, var_bearing: float = 0.175,
                       **kwargs) -> "SensorConfig":
        return cls(sigma_range=math.sqrt(var_range),
                   sigma_bearing=math.sqrt(var_bearing), **kwargs)


class Measurement(NamedTuple):
    r: float      # meters, >= 0
    theta: float  # radians in (-pi, pi]


@dataclass
class ConfirmedTarget:
    position: np.ndarray  # (2,) meters
    step_confirmed: int

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)


def detection_prob(target_pos, agent_pos, sensor: SensorConfig):
    """Probability of detecting a target from the agent position.

    ``target_pos`` may be a single point or an (N, 2) array; the result is a
    scalar or an (N,) array accordingly. Equals ``gain * exp(-|zeta|/2)`` with
    zeta the field-of-view-normalized offset.
    """
    target = np.asarray(target_pos, dtype=float)
    agent = np.asarray(agent_pos, dtype=float)
    zeta = (target - agent) / np.array([sensor.fov_x, sensor.fov_y])
    norm = np.linalg.norm(zeta, axis=-1)
    return sensor.gain * np.exp(-norm / 2.0)


def range_bearing(target_pos, agent_pos) -> Measurement:
    """Noiseless range-bearing observation; bearing is 0 for coincident points."""
    dx = float(target_pos[0]) - float(agent_pos[0])
    dy = float(target_pos[1]) - float(agent_pos[1])
    r = math.hypot(dx, dy)
    theta = math.atan2(dy, dx) if r > 0.0 else 0.0
    return Measurement(r, theta)


def sample_measurements(targets, agent_pos, sensor: SensorConfig,
                        rng: np.random.Generator,
                        force_detect: bool = False) -> list[Measurement]:
    """Bernoulli detections with Gaussian range-bearing noise.

    Each target is detected with probability ``detection_prob``; detected
    targets produce their true range-bearing plus independent zero-mean noise,
    with the bearing wrapped into (-pi, pi] and negative ranges clamped to 0.
    ``force_detect`` is a test hook that makes every target detected.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    measurements: list[Measurement] = []
    for target in targets:
        prob = 1.0 if force_detect else float(detection_prob(target, agent_pos, sensor))
        if rng.random() >= prob:
            continue
        r, theta = range_bearing(target, agent_pos)
        r = max(0.0, r + rng.normal(0.0, sensor.sigma_range))
        theta = float(wrap_angle(theta + rng.normal(0.0, sensor.sigma_bearing)))
        measurements.append(Measurement(r, theta))
    return measurements


def measurement_point(z: Measurement, agent_pos) -> np.ndarray:
    """Cartesian point implied by a range-bearing measurement."""
    agent = np.asarray(agent_pos, dtype=float)
    return agent + z.r * np.array([math.cos(z.theta), math.sin(z.theta)])


def gate_confirmed(measurements: Sequence[Measurement], agent_pos,
                   confirmed: Sequence[ConfirmedTarget],
                   gate_radius: float = 15.0) -> list[Measurement]:
    """Drop measurements whose implied point lies within ``gate_radius`` of a confirmed target."""
    if gate_radius <= 0:
        raise ValueError("gate_radius must be positive")
    if not confirmed:
        return list(measurements)
    centers = np.stack([c.position for c in confirmed])
    kept = []
    for z in measurements:
        point = measurement_point(z, agent_pos)
        if np.min(np.linalg.norm(centers - point, axis=1)) > gate_radius:
            kept.append(z)
    return kept
