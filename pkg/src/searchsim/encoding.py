"""Four-channel grid encoding of the search state for the waypoint network.

Channel order is fixed: [visit, dens, pos, bound]. Arrays are indexed
``[a - 1, b - 1]`` with ``a`` the 1-based x cell and ``b`` the y cell.
Ablation variants zero out one channel (or skip the density smoothing) while
preserving the tensor shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .phd import ParticleSet
from .world import CellIndex, Environment, GridSpec, cell_of, cells_of

CHANNEL_NAMES = ("visit", "dens", "pos", "bound")
VARIANTS = ("full", "no_visit", "no_smooth", "no_pos", "no_bound")
# variant name -> channel it alters
_VARIANT_CHANNEL = {"no_visit": 0, "no_smooth": 1, "no_pos": 2, "no_bound": 3}


@dataclass
class VisitMap:
    """Per-episode visitation memory; a count increments only on cell entry."""

    counts: np.ndarray            # (n_g, n_g) int64
    last_cell: CellIndex | None = None

    @classmethod
    def fresh(cls, grid: GridSpec) -> "VisitMap":
        return cls(counts=np.zeros((grid.n_g, grid.n_g), dtype=np.int64))

    def copy(self) -> "VisitMap":
        return VisitMap(self.counts.copy(), self.last_cell)


def visit_update(vmap: VisitMap, agent_pos, grid: GridSpec) -> VisitMap:
    """Register a visit when the agent enters a new cell (mutates and returns vmap)."""
    cell = cell_of(agent_pos, grid)
    if cell != vmap.last_cell:
        vmap.counts[cell.a - 1, cell.b - 1] += 1
        vmap.last_cell = cell
    return vmap


def visit_channel(vmap: VisitMap) -> np.ndarray:
    """Decaying visit memory, 1 / (1 + count) per cell."""
    return 1.0 / (1.0 + vmap.counts)


def gaussian_kernel(sigma_cells: float) -> np.ndarray:
    """Truncated (radius ceil(3 sigma)) Gaussian kernel normalized to unit sum."""
    if sigma_cells <= 0:
        raise ValueError("sigma_cells must be positive")
    radius = math.ceil(3.0 * sigma_cells)
    offsets = np.arange(-radius, radius + 1)
    u, v = np.meshgrid(offsets, offsets, indexing="ij")
    kernel = np.exp(-(u * u + v * v) / (2.0 * sigma_cells ** 2))
    return kernel / kernel.sum()


def _convolve_same(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    radius = kernel.shape[0] // 2
    padded = np.pad(image, radius)
    windows = sliding_window_view(padded, kernel.shape)
    return np.einsum("ijkl,kl->ij", windows, kernel)


def raw_intensity(particles: ParticleSet, grid: GridSpec) -> np.ndarray:
    """Particle weights accumulated per grid cell."""
    if len(particles) == 0:
        return np.zeros((grid.n_g, grid.n_g))
    cells = cells_of(particles.positions, grid)
    flat = (cells[:, 0] - 1) * grid.n_g + (cells[:, 1] - 1)
    binned = np.bincount(flat, weights=particles.weights, minlength=grid.n_g * grid.n_g)
    return binned.reshape(grid.n_g, grid.n_g)


def density_channel(particles: ParticleSet, grid: GridSpec,
                    sigma_cells: float = 1.0) -> np.ndarray:
    """Gaussian-smoothed intensity map (zero-padded borders leak mass outward)."""
    return _convolve_same(raw_intensity(particles, grid), gaussian_kernel(sigma_cells))


def position_channel(agent_pos, grid: GridSpec) -> np.ndarray:
    """One-hot mask of the agent's current cell."""
    channel = np.zeros((grid.n_g, grid.n_g))
    cell = cell_of(agent_pos, grid)
    channel[cell.a - 1, cell.b - 1] = 1.0
    return channel


def boundary_channel(grid: GridSpec, thickness: int = 2) -> np.ndarray:
    """Mask of cells within ``thickness`` cells of any boundary."""
    if thickness < 1:
        raise ValueError("thickness must be >= 1")
    a = np.arange(1, grid.n_g + 1)
    near = (a <= thickness) | (a > grid.n_g - thickness)
    return (near[:, None] | near[None, :]).astype(float)


def normalize_label(waypoint, env: Environment) -> np.ndarray:
    """Waypoint in meters -> unit square."""
    return np.asarray(waypoint, dtype=float) / np.array([env.width, env.height])


def denormalize_label(label, env: Environment) -> np.ndarray:
    """Unit-square prediction -> meters."""
    return np.asarray(label, dtype=float) * np.array([env.width, env.height])


@dataclass(frozen=True)
class EncoderConfig:
    sigma_cells: float = 1.0
    boundary_thickness: int = 2

    def __post_init__(self):
        if self.sigma_cells <= 0:
            raise ValueError("sigma_cells must be positive")
        if self.boundary_thickness < 1:
            raise ValueError("boundary_thickness must be >= 1")


def build_encoding(particles: ParticleSet, agent_pos, vmap: VisitMap,
                   grid: GridSpec, cfg: EncoderConfig = EncoderConfig(),
                   variant: str = "full") -> np.ndarray:
    """Stacked (n_g, n_g, 4) channels [visit, dens, pos, bound] for one state.

    ``no_smooth`` keeps the raw accumulated intensity in the density slot; the
    other ablations zero their channel so the tensor shape is preserved.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    raw = raw_intensity(particles, grid)
    if variant == "no_smooth":
        dens = raw
    else:
        dens = _convolve_same(raw, gaussian_kernel(cfg.sigma_cells))
    channels = np.stack([
        visit_channel(vmap),
        dens,
        position_channel(agent_pos, grid),
        boundary_channel(grid, cfg.boundary_thickness),
    ], axis=2)
    zeroed = _VARIANT_CHANNEL.get(variant)
    if variant != "no_smooth" and zeroed is not None:
        channels[:, :, zeroed] = 0.0
    return channels


def apply_variant(encoding_raw: np.ndarray, variant: str,
                  cfg: EncoderConfig = EncoderConfig()) -> np.ndarray:
    """Materialize a variant from a stored raw-density encoding.

    Dataset records keep the unsmoothed intensity in the density slot so one
    collection can train every ablation; this applies the per-variant
    transform (smoothing for all variants except ``no_smooth``, then channel
    zeroing).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    out = np.array(encoding_raw, dtype=float, copy=True)
    if variant != "no_smooth":
        kernel = gaussian_kernel(cfg.sigma_cells)
        if out.ndim == 3:
            out[:, :, 1] = _convolve_same(out[:, :, 1], kernel)
        else:
            for sample in out:
                sample[:, :, 1] = _convolve_same(sample[:, :, 1], kernel)
        zeroed = _VARIANT_CHANNEL.get(variant)
        if zeroed is not None:
            out[..., zeroed] = 0.0
    return out


def encoding_to_input(encoding: np.ndarray) -> np.ndarray:
    """(n_g, n_g, 4) channels-last -> (4, n_g, n_g) network layout."""
    return np.ascontiguousarray(np.moveaxis(encoding, -1, -3))
