"""Sequential Monte-Carlo PHD filter over a particle-represented intensity function.

The total particle weight approximates the expected number of targets in the
environment. Prediction keeps positions fixed (stationary targets), scales
weights by the survival probability, and injects uniformly placed birth
particles; the update reweights particles against the measurement set; heavy,
narrow K-means clusters are promoted to confirmed targets.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sensing import ConfirmedTarget, Measurement, SensorConfig, detection_prob, wrap_angle
from .world import Environment

log = logging.getLogger(__name__)


class DegenerateWeightsError(RuntimeError):
    """Total particle weight collapsed to zero."""


@dataclass
class ParticleSet:
    """Weighted particles (positions, nonnegative weights) with a resampling cap."""

    positions: np.ndarray  # (N, 2) float64
    weights: np.ndarray    # (N,) float64, >= 0
    cap: int = 5000

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.positions) != len(self.weights):
            raise ValueError("positions and weights must have equal length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def empty(cls, cap: int = 5000) -> "ParticleSet":
        return cls(np.empty((0, 2)), np.empty(0), cap=cap)

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.positions.copy(), self.weights.copy(), cap=self.cap)


@dataclass(frozen=True)
class BirthConfig:
    """Constant birth intensity: expected new-target mass injected per measurement cycle."""

    total_mass: float = 0.2
    n_particles: int = 250

    def __post_init__(self):
        if self.total_mass < 0:
            raise ValueError("birth mass must be nonnegative")
        if self.total_mass > 0 and self.n_particles < 1:
            raise ValueError("positive birth mass requires at least one birth particle")


@dataclass(frozen=True)
class Cluster:
    center: np.ndarray  # (2,)
    mass: float         # summed member weights
    spread: float       # weighted RMS member distance to center, meters


@dataclass
class UpdateStats:
    """Counters for numerically degenerate update terms."""

    degenerate_skips: int = 0


def predict(particles: ParticleSet, survival_prob: float, birth: BirthConfig,
            env: Environment, rng: np.random.Generator) -> ParticleSet:
    """Survival-scaled weights plus uniformly placed birth particles.

    Mass identity: mass_out == survival_prob * mass_in + birth.total_mass.
    """
    if not (0.0 < survival_prob <= 1.0):
        raise ValueError("survival probability must be in (0, 1]")
    weights = particles.weights * survival_prob
    positions = particles.positions
    if birth.total_mass > 0:
        born = rng.uniform([0.0, 0.0], [env.width, env.height],
                           size=(birth.n_particles, 2))
        positions = np.concatenate([positions, born])
        weights = np.concatenate([
            weights, np.full(birth.n_particles, birth.total_mass / birth.n_particles)
        ])
    return ParticleSet(positions, weights, cap=particles.cap)


def likelihood(z: Measurement, particle_positions, agent_pos,
               sensor: SensorConfig) -> np.ndarray:
    """Gaussian measurement density of z for each particle position.

    Bivariate normal in (range, bearing) residuals with diagonal covariance;
    the bearing residual is wrapped into (-pi, pi].
    """
    positions = np.asarray(particle_positions, dtype=float).reshape(-1, 2)
    agent = np.asarray(agent_pos, dtype=float)
    delta = positions - agent
    ranges = np.hypot(delta[:, 0], delta[:, 1])
    bearings = np.where(ranges > 0, np.arctan2(delta[:, 1], delta[:, 0]), 0.0)
    dr = (z.r - ranges) / sensor.sigma_range
    dth = wrap_angle(z.theta - bearings) / sensor.sigma_bearing
    coef = 1.0 / (2.0 * math.pi * sensor.sigma_range * sensor.sigma_bearing)
    return coef * np.exp(-0.5 * (dr * dr + dth * dth))


def update(particles: ParticleSet, measurements: Sequence[Measurement], agent_pos,
           sensor: SensorConfig, stats: UpdateStats | None = None) -> ParticleSet:
    """PHD measurement update (clutter-free).

    Each weight is multiplied by ``1 - pi(x) + sum_z psi_z(x) / <psi_z, I>``
    where ``psi_z(x) = pi(x) p(z | x)``. A measurement whose normalizer
    underflows to zero is skipped and counted in ``stats``.
    """
    if len(particles) == 0:
        raise ValueError("update requires a non-empty particle set")
    pi = detection_prob(particles.positions, agent_pos, sensor)
    bracket = 1.0 - pi
    for z in measurements:
        psi = pi * likelihood(z, particles.positions, agent_pos, sensor)
        denom = float(psi @ particles.weights)
        if denom <= 0.0 or not math.isfinite(denom):
            if stats is not None:
                stats.degenerate_skips += 1
            log.warning("skipping measurement with degenerate normalizer (r=%.2f)", z.r)
            continue
        bracket = bracket + psi / denom
    return ParticleSet(particles.positions, particles.weights * bracket, cap=particles.cap)


def expected_count(particles: ParticleSet) -> float:
    """Expected number of targets in the environment (total particle weight)."""
    return float(particles.weights.sum())


def resample(particles: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Systematic resampling to min(cap, N) equally weighted particles.

    Total mass is preserved exactly; raises on zero total mass.
    """
    total = float(particles.weights.sum())
    if total <= 0.0:
        raise DegenerateWeightsError("cannot resample a zero-mass particle set")
    n_out = min(particles.cap, len(particles))
    points = (rng.random() + np.arange(n_out)) / n_out * total
    cumulative = np.cumsum(particles.weights)
    cumulative[-1] = total  # guard against rounding in the final bin
    idx = np.searchsorted(cumulative, points, side="right")
    idx = np.minimum(idx, len(particles) - 1)
    positions = particles.positions[idx]
    weights = np.full(n_out, total / n_out)
    return ParticleSet(positions, weights, cap=particles.cap)


def choose_k(particles: ParticleSet, k_max: int = 30) -> int:
    """Cluster count: rounded expected target count, clamped to [0, k_max]."""
    k = int(math.floor(expected_count(particles) + 0.5))
    return min(max(k, 0), k_max)


def _kmeans_once(positions: np.ndarray, weights: np.ndarray, k: int,
                 rng: np.random.Generator, max_iter: int, tol: float):
    """One weighted Lloyd run with k-means++ seeding; returns (centers, assignment, wcss)."""
    n = len(positions)
    total = weights.sum()
    centers = np.empty((k, 2))
    probs = weights / total
    first = rng.choice(n, p=probs)
    centers[0] = positions[first]
    closest_sq = np.sum((positions - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        scores = closest_sq * weights
        mass = scores.sum()
        if mass > 0:
            pick = rng.choice(n, p=scores / mass)
        else:
            pick = rng.choice(n, p=probs)
        centers[c] = positions[pick]
        closest_sq = np.minimum(closest_sq, np.sum((positions - centers[c]) ** 2, axis=1))

    assignment = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = (np.sum(positions ** 2, axis=1)[:, None]
              - 2.0 * positions @ centers.T
              + np.sum(centers ** 2, axis=1)[None, :])
        assignment = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        shift = 0.0
        for c in range(k):
            members = assignment == c
            mass = weights[members].sum()
            if mass > 0:
                new_centers[c] = weights[members] @ positions[members] / mass
                shift = max(shift, float(np.hypot(*(new_centers[c] - centers[c]))))
        centers = new_centers
        if shift < tol:
            break
    d2 = np.sum((positions - centers[assignment]) ** 2, axis=1)
    wcss = float(weights @ d2)
    return centers, assignment, wcss


def extract_clusters(particles: ParticleSet, k: int, rng: np.random.Generator,
                     n_restarts: int = 5, max_iter: int = 50,
                     tol: float = 1e-6) -> list[Cluster]:
    """Weighted K-means clusters (best of ``n_restarts`` by weighted WCSS).

    Every particle is assigned to exactly one cluster, so cluster masses sum
    to the total particle mass. Empty clusters are dropped.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0 or len(particles) == 0:
        return []
    total = particles.weights.sum()
    if total <= 0.0:
        return []
    k = min(k, len(particles))

    best = None
    for _ in range(n_restarts):
        centers, assignment, wcss = _kmeans_once(
            particles.positions, particles.weights, k, rng, max_iter, tol)
        if best is None or wcss < best[2]:
            best = (centers, assignment, wcss)
    centers, assignment, _ = best

    clusters: list[Cluster] = []
    for c in range(k):
        members = assignment == c
        if not members.any():
            continue
        mass = float(particles.weights[members].sum())
        if mass <= 0.0:
            continue
        center = particles.weights[members] @ particles.positions[members] / mass
        d2 = np.sum((particles.positions[members] - center) ** 2, axis=1)
        spread = math.sqrt(float(particles.weights[members] @ d2) / mass)
        clusters.append(Cluster(center=center, mass=mass, spread=spread))
    return clusters


def promote_confirmed(clusters: Sequence[Cluster], mass_thresh: float = 0.8,
                      spread_thresh: float = 5.0, step: int = 0
                      ) -> tuple[list[ConfirmedTarget], list[Cluster]]:
    """Split clusters into newly confirmed targets and the remainder.

    A cluster is promoted when it is heavy (mass >= mass_thresh) and narrow
    (spread <= spread_thresh). The caller removes the promoted cluster's
    particles from the set (see :func:`remove_near`).
    """
    if mass_thresh <= 0 or spread_thresh <= 0:
        raise ValueError("promotion thresholds must be positive")
    promoted, remaining = [], []
    for cluster in clusters:
        if cluster.mass >= mass_thresh and cluster.spread <= spread_thresh:
            promoted.append(ConfirmedTarget(position=cluster.center.copy(),
                                            step_confirmed=step))
        else:
            remaining.append(cluster)
    return promoted, remaining


def remove_near(particles: ParticleSet, center, radius: float) -> ParticleSet:
    """Particles farther than ``radius`` from ``center`` (promoted-cluster deletion)."""
    center = np.asarray(center, dtype=float)
    dist = np.linalg.norm(particles.positions - center, axis=1)
    keep = dist > radius
    return ParticleSet(particles.positions[keep], particles.weights[keep],
                       cap=particles.cap)
