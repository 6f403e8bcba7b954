"""Environment geometry, true-target scenarios, grid indexing, and seeded RNG streams.

All randomness in the package flows through :func:`substream`: one master seed
per trial, with each module drawing from its own named stream so that adding
draws in one module never perturbs another.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

_MASK64 = (1 << 64) - 1
_MAX_PLACEMENT_ATTEMPTS = 10_000


class ScenarioError(RuntimeError):
    """Scenario constraints cannot be satisfied (infeasible geometry)."""


def substream(master_seed: int, name: str, trial: int = 0) -> np.random.Generator:
    """Independent generator for a named module stream under one master seed.

    The stream key is a stable hash of ``name:trial``, so streams are
    reproducible across processes and platforms.
    """
    digest = hashlib.sha256(f"{name}:{trial}".encode()).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([master_seed & _MASK64, key]))


def derive_seed(master_seed: int, name: str, trial: int = 0) -> int:
    """Stable 63-bit integer seed derived from a master seed and a stream name."""
    digest = hashlib.sha256(f"{master_seed & _MASK64}:{name}:{trial}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass(frozen=True)
class Environment:
    """Rectangular search area ``[0, width) x [0, height)`` in meters."""

    width: float = 260.0
    height: float = 260.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("environment dimensions must be positive")

    def contains(self, point) -> bool:
        x, y = float(point[0]), float(point[1])
        return 0.0 <= x < self.width and 0.0 <= y < self.height

    def clamp(self, point) -> np.ndarray:
        """Clamp a point (or an (N, 2) array) into the closed box."""
        return np.clip(np.asarray(point, dtype=float), 0.0, [self.width, self.height])


@dataclass(frozen=True)
class GridSpec:
    """Square spatial grid: ``n_g`` cells per side, each ``cell_size`` m wide."""

    n_g: int = 26
    cell_size: float = 10.0

    def __post_init__(self):
        if self.n_g < 1 or self.cell_size <= 0:
            raise ValueError("grid must have at least one positive-size cell")

    def check_matches(self, env: Environment) -> None:
        side = self.n_g * self.cell_size
        if not (math.isclose(side, env.width) and math.isclose(side, env.height)):
            raise ValueError(
                f"grid covers {side} m but environment is {env.width} x {env.height} m"
            )


class CellIndex(NamedTuple):
    a: int  # 1-based x cell
    b: int  # 1-based y cell


def cell_of(position, grid: GridSpec) -> CellIndex:
    """Cell containing ``position``; points outside clamp to the edge cells.

    A point exactly on a cell boundary belongs to the higher-indexed cell
    (floor + 1 rule).
    """
    a = int(math.floor(float(position[0]) / grid.cell_size)) + 1
    b = int(math.floor(float(position[1]) / grid.cell_size)) + 1
    a = min(max(a, 1), grid.n_g)
    b = min(max(b, 1), grid.n_g)
    return CellIndex(a, b)


def cells_of(positions: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Vectorized :func:`cell_of`: (N, 2) positions -> (N, 2) int array of (a, b)."""
    idx = np.floor(np.asarray(positions, dtype=float) / grid.cell_size).astype(np.int64) + 1
    return np.clip(idx, 1, grid.n_g)


@dataclass(frozen=True)
class Scenario:
    """True-target layout with the seed that generated it."""

    env: Environment
    targets: np.ndarray  # (N, 2) float64, strictly inside env
    seed: int
    kind: str  # "uniform" | "clustered"

    def __post_init__(self):
        targets = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "targets", targets)
        for t in targets:
            if not self.env.contains(t):
                raise ValueError(f"target {t.tolist()} lies outside the environment")

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def to_json(self) -> str:
        doc = {
            "seed": int(self.seed),
            "kind": self.kind,
            "env": {"w": self.env.width, "h": self.env.height},
            "targets": [[float(x), float(y)] for x, y in self.targets],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        env = Environment(width=doc["env"]["w"], height=doc["env"]["h"])
        return cls(env=env, targets=np.asarray(doc["targets"], dtype=float),
                   seed=int(doc["seed"]), kind=doc["kind"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_json(Path(path).read_text())


def make_uniform_scenario(seed: int, n_targets: int = 18,
                          env: Environment = Environment()) -> Scenario:
    """Targets i.i.d. uniform over the environment; deterministic given seed."""
    if n_targets < 1:
        raise ValueError("n_targets must be >= 1")
    rng = substream(seed, "scenario-uniform")
    targets = rng.uniform([0.0, 0.0], [env.width, env.height], size=(n_targets, 2))
    return Scenario(env=env, targets=targets, seed=seed, kind="uniform")


def make_clustered_scenario(seed: int, n_clusters: int = 3, per_cluster: int = 5,
                            env: Environment = Environment(), min_sep: float = 110.0,
                            margin: float = 40.0, spread: float = 15.0) -> Scenario:
    """Compact, well-separated target clusters.

    Cluster centers are rejection-sampled so they stay at least ``min_sep``
    apart and ``margin`` from every boundary; each cluster's targets fall
    within ``spread`` of its center.
    """
    if n_clusters < 1 or per_cluster < 1:
        raise ValueError("n_clusters and per_cluster must be >= 1")
    if min_sep <= 0 or margin <= 0 or spread <= 0:
        raise ValueError("min_sep, margin and spread must be positive")
    if env.width <= 2 * margin or env.height <= 2 * margin:
        raise ScenarioError("margin leaves no room for cluster centers")

    rng = substream(seed, "scenario-clustered")
    centers: list[np.ndarray] = []
    attempts = 0
    while len(centers) < n_clusters:
        if attempts >= _MAX_PLACEMENT_ATTEMPTS:
            raise ScenarioError(
                f"could not place {n_clusters} cluster centers with min_sep={min_sep}, "
                f"margin={margin} in {env.width} x {env.height} m after {attempts} attempts"
            )
        attempts += 1
        c = rng.uniform([margin, margin], [env.width - margin, env.height - margin])
        if all(np.hypot(*(c - other)) >= min_sep for other in centers):
            centers.append(c)

    targets = []
    for c in centers:
        placed = 0
        attempts = 0
        while placed < per_cluster:
            if attempts >= _MAX_PLACEMENT_ATTEMPTS:
                raise ScenarioError("could not place cluster targets inside the environment")
            attempts += 1
            radius = spread * math.sqrt(rng.random())
            angle = rng.uniform(0.0, 2.0 * math.pi)
            t = c + radius * np.array([math.cos(angle), math.sin(angle)])
            if env.contains(t):
                targets.append(t)
                placed += 1
    return Scenario(env=env, targets=np.asarray(targets), seed=seed, kind="clustered")
