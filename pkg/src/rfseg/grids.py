"""Voxel grid containers and continuous sampling.

Conventions used everywhere in this package:

* grid arrays have shape ``(X, Y, D)`` (color grids ``(X, Y, D, 3)``,
  channel-last);
* the center of voxel ``(i, j, k)`` sits at
  ``origin + (i + 0.5, j + 0.5, k + 0.5) * voxel_size``;
* the flat index of voxel ``(i, j, k)`` is the C-order index of the
  ``(X, Y, D)`` array, i.e. ``(i * Y + j) * D + k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "VoxelGrid",
    "DensityGrid",
    "OpacityGrid",
    "ColorGrid",
    "densities_to_opacity",
    "sample_trilinear",
    "world_to_grid",
    "grid_to_world",
]


@dataclass
class VoxelGrid:
    """Dense scalar field on a regular grid.

    ``values`` has shape ``(X, Y, D)`` plus optional trailing channel axes.
    ``voxel_size`` is the world-space edge length of one voxel and
    ``origin`` is the world position of the corner of voxel (0, 0, 0)
    (so the first voxel center is at ``origin + 0.5 * voxel_size``).
    """

    values: np.ndarray
    voxel_size: float = 1.0
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.origin = np.asarray(self.origin, dtype=np.float64)
        if self.origin.shape != (3,):
            raise ValidationError(f"origin must be a 3-vector, got {self.origin.shape}")
        if self.voxel_size <= 0:
            raise ValidationError(f"voxel_size must be > 0, got {self.voxel_size}")
        if self.values.ndim < 3:
            raise ValidationError(f"grid values must be at least 3-D, got shape {self.values.shape}")
        if any(n < 2 for n in self.values.shape[:3]):
            raise ValidationError(f"grid needs >= 2 voxels per axis, got dims {self.values.shape[:3]}")
        self._validate_values()

    def _validate_values(self):
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("grid values must be finite")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.values.shape[:3])

    @property
    def world_min(self) -> np.ndarray:
        return self.origin

    @property
    def world_max(self) -> np.ndarray:
        return self.origin + np.asarray(self.dims, dtype=np.float64) * self.voxel_size

    def voxel_centers(self) -> np.ndarray:
        """World coordinates of every voxel center, shape (X, Y, D, 3)."""
        X, Y, D = self.dims
        ii, jj, kk = np.meshgrid(np.arange(X), np.arange(Y), np.arange(D), indexing="ij")
        idx = np.stack([ii, jj, kk], axis=-1).astype(np.float64)
        return self.origin + (idx + 0.5) * self.voxel_size


class DensityGrid(VoxelGrid):
    """Non-negative volume density per voxel."""

    def _validate_values(self):
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("density values must be finite")
        if np.any(self.values < 0):
            raise ValidationError("density values must be >= 0")


class OpacityGrid(VoxelGrid):
    """Per-voxel opacity in [0, 1]."""

    def _validate_values(self):
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("opacity values must be finite")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValidationError("opacity values must lie in [0, 1]")


class ColorGrid(VoxelGrid):
    """Per-voxel RGB color, channel-last, values in [0, 1]."""

    def _validate_values(self):
        if self.values.ndim != 4 or self.values.shape[3] != 3:
            raise ValidationError(f"color grid must have shape (X, Y, D, 3), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("color values must be finite")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValidationError("color values must lie in [0, 1]")


def densities_to_opacity(grid: DensityGrid, delta: float | None = None) -> OpacityGrid:
    """Convert a density grid to per-voxel opacity over step length ``delta``.

    ``alpha = 1 - exp(-sigma * delta)``, computed in float64. ``delta``
    defaults to the grid's voxel size.
    """
    if delta is None:
        delta = grid.voxel_size
    if delta <= 0:
        raise ValidationError(f"delta must be > 0, got {delta}")
    sigma = np.asarray(grid.values, dtype=np.float64)
    if not np.all(np.isfinite(sigma)):
        raise ValidationError("density values must be finite")
    alpha = -np.expm1(-sigma * float(delta))
    # expm1 keeps alpha exact near 0 and can only land in [0, 1] for sigma >= 0
    return OpacityGrid(alpha, voxel_size=grid.voxel_size, origin=grid.origin)


def world_to_grid(grid: VoxelGrid, positions: np.ndarray) -> np.ndarray:
    """Map world positions to continuous voxel-center coordinates.

    The returned coordinate equals ``i`` exactly at the center of voxel ``i``.
    """
    positions = np.asarray(positions, dtype=np.float64)
    return (positions - grid.origin) / grid.voxel_size - 0.5


def grid_to_world(grid: VoxelGrid, coords: np.ndarray) -> np.ndarray:
    """Inverse of :func:`world_to_grid`."""
    coords = np.asarray(coords, dtype=np.float64)
    return grid.origin + (coords + 0.5) * grid.voxel_size


def corner_terms(dims: tuple[int, int, int], grid_coords: np.ndarray):
    """Per-corner (linear index, weight) pairs for trilinear interpolation.

    ``grid_coords`` are continuous voxel-center coordinates, shape (M, 3).
    Returns 8 pairs of (M,) arrays; out-of-bounds corners carry weight 0
    and a clamped in-range index. Decomposed per axis to keep temporaries
    small on large batches.
    """
    X, Y, D = dims
    axinfo = []
    for ax, n in enumerate((X, Y, D)):
        ga = grid_coords[:, ax]
        i0f = np.floor(ga)
        f = ga - i0f
        i0 = i0f.astype(np.int64)
        i1 = i0 + 1
        w0 = 1.0 - f
        w0[(i0 < 0) | (i0 >= n)] = 0.0
        w1 = f
        w1[(i1 < 0) | (i1 >= n)] = 0.0
        np.clip(i0, 0, n - 1, out=i0)
        np.clip(i1, 0, n - 1, out=i1)
        axinfo.append(((i0, w0), (i1, w1)))
    terms = []
    for bx in range(2):
        ix, wx = axinfo[0][bx]
        for by in range(2):
            iy, wy = axinfo[1][by]
            lin_xy = (ix * Y + iy) * D
            w_xy = wx * wy
            for bz in range(2):
                iz, wz = axinfo[2][bz]
                terms.append((lin_xy + iz, w_xy * wz))
    return terms


def sample_trilinear(grid: VoxelGrid, positions: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of the grid at world positions.

    ``positions`` has shape (..., 3). Returns an array of shape (...) for
    scalar grids and (..., C) for channel-last grids. Positions outside the
    grid interpolate against zeros (fully outside returns exactly 0).
    """
    positions = np.asarray(positions, dtype=np.float64)
    squeeze = positions.ndim == 1
    pts = np.atleast_2d(positions)
    flat = pts.reshape(-1, 3)

    values = grid.values
    g = (flat - grid.origin) / grid.voxel_size - 0.5
    out = sample_trilinear_flat(values, g)
    out = out.reshape(pts.shape[:-1] + values.shape[3:])
    if squeeze:
        out = out[0]
    return out


def sample_trilinear_flat(values: np.ndarray, grid_coords: np.ndarray) -> np.ndarray:
    """Trilinear interpolation given voxel-center coordinates, (M, 3)."""
    terms = corner_terms(values.shape[:3], grid_coords)
    M = grid_coords.shape[0]
    has_channels = values.ndim > 3
    if has_channels:
        vflat = values.reshape(-1, *values.shape[3:])
        out = np.zeros((M,) + values.shape[3:], dtype=np.float64)
        for lin, w in terms:
            out += w[:, None] * vflat[lin]
    else:
        vflat = values.reshape(-1)
        out = np.zeros(M, dtype=np.float64)
        for lin, w in terms:
            out += w * vflat[lin]
    return out


def trilinear_corner_indices(grid_dims: tuple[int, int, int],
                             grid_coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flat corner indices and weights for trilinear interpolation.

    ``grid_coords`` are continuous voxel-center coordinates, shape (M, 3).
    Returns ``(idx, w)`` with shape (8, M) each; out-of-bounds corners get
    weight 0 and a clamped (valid) index, so a gather-and-weight reduction
    reproduces :func:`sample_trilinear` on a flattened grid.
    """
    coords = np.asarray(grid_coords, dtype=np.float64)
    terms = corner_terms(grid_dims, coords)
    idx = np.stack([lin for lin, _ in terms])
    w = np.stack([wc for _, wc in terms])
    return idx, w
