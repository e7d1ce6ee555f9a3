"""Volume rendering over opacity/color voxel grids.

The heavy path is fully vectorized over rays; the per-ray dataclass API
wraps it for clarity and tests. All accumulation runs in float64.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .cameras import Camera
from .errors import ValidationError
from .grids import VoxelGrid, sample_trilinear

__all__ = [
    "Ray",
    "RaySamples",
    "generate_ray",
    "generate_rays",
    "march",
    "march_rays",
    "render_channel",
    "render_view",
    "max_weight_point",
    "max_weight_points",
    "default_sample_count",
    "ray_aabb",
    "to_png_bytes",
    "write_png",
    "write_raw_f32",
]

# rays whose best sample weight falls below this carry no usable 3D projection
W_MIN_PROJECTION = 1e-4


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_near: float
    t_far: float

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.direction = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(self.direction)
        if abs(n - 1.0) > 1e-9:
            raise ValidationError(f"ray direction must be unit length, |d| = {n}")
        if self.t_near > self.t_far:
            raise ValidationError("t_near must be <= t_far")

    @property
    def empty(self) -> bool:
        return self.t_far <= self.t_near


@dataclass
class RaySamples:
    """Uniform samples along one ray with compositing weights."""

    positions: np.ndarray      # (N, 3)
    deltas: np.ndarray         # (N,)
    alphas: np.ndarray         # (N,)
    transmittance: np.ndarray  # (N,)
    weights: np.ndarray        # (N,)

    @property
    def count(self) -> int:
        return self.weights.shape[0]


def ray_aabb(origins: np.ndarray, directions: np.ndarray,
             box_min: np.ndarray, box_max: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clip rays against an axis-aligned box.

    Returns (t_near, t_far) per ray with t_near >= 0; misses yield
    t_near == t_far. Shapes: origins/directions (..., 3).
    """
    origins = np.asarray(origins, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    par = directions == 0.0
    inv = 1.0 / np.where(par, 1.0, directions)
    t0 = (box_min - origins) * inv
    t1 = (box_max - origins) * inv
    lo = np.minimum(t0, t1)
    hi = np.maximum(t0, t1)
    # axes with zero direction constrain nothing when the origin lies inside
    # the slab and kill the ray otherwise
    inside_slab = (origins >= box_min) & (origins <= box_max)
    lo = np.where(par, np.where(inside_slab, -np.inf, np.inf), lo)
    hi = np.where(par, np.where(inside_slab, np.inf, -np.inf), hi)
    t_near = np.maximum(lo.max(axis=-1), 0.0)
    t_far = hi.min(axis=-1)
    t_far = np.maximum(t_far, t_near)
    miss = t_far <= t_near
    t_far = np.where(miss, t_near, t_far)
    return t_near, t_far


def generate_rays(camera: Camera, pixels: np.ndarray, grid: VoxelGrid):
    """Rays through pixel centers, clipped to the grid bounding box.

    Returns (origins, directions, t_near, t_far), vectorized over pixels.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    u = pixels[..., 0]
    v = pixels[..., 1]
    if np.any(u < 0) or np.any(u >= camera.width) or np.any(v < 0) or np.any(v >= camera.height):
        raise ValidationError("pixel outside image bounds")
    directions = camera.pixel_directions(pixels)
    origins = np.broadcast_to(camera.translation, directions.shape).copy()
    t_near, t_far = ray_aabb(origins, directions, grid.world_min, grid.world_max)
    return origins, directions, t_near, t_far


def generate_ray(camera: Camera, pixel, grid: VoxelGrid) -> Ray:
    o, d, tn, tf = generate_rays(camera, np.asarray(pixel, dtype=np.float64), grid)
    return Ray(o, d, float(tn), float(tf))


def default_sample_count(grid: VoxelGrid) -> int:
    """Twice the grid diagonal in voxels, capped at 256."""
    diag = float(np.linalg.norm(grid.dims))
    return int(min(256, max(1, np.ceil(2.0 * diag))))


def march_rays(opacity: VoxelGrid, origins, directions, t_near, t_far, n_samples: int):
    """Sample ``n_samples`` uniform positions on each ray and composite.

    Returns (positions (R, N, 3), deltas (R,), alphas, transmittance,
    weights (R, N)). Empty rays get zero alphas/weights and unit
    transmittance.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    t_near = np.atleast_1d(np.asarray(t_near, dtype=np.float64))
    t_far = np.atleast_1d(np.asarray(t_far, dtype=np.float64))

    span = t_far - t_near
    delta = span / n_samples
    steps = (np.arange(n_samples, dtype=np.float64) + 0.5) / n_samples
    ts = t_near[:, None] + span[:, None] * steps[None, :]
    positions = origins[:, None, :] + directions[:, None, :] * ts[..., None]

    alphas = sample_trilinear(opacity, positions)
    empty = span <= 0.0
    alphas[empty] = 0.0

    one_minus = 1.0 - alphas
    trans = np.cumprod(one_minus, axis=1)
    trans = np.concatenate([np.ones((alphas.shape[0], 1)), trans[:, :-1]], axis=1)
    weights = trans * alphas
    return positions, delta, alphas, trans, weights


def march(opacity: VoxelGrid, ray: Ray, n_samples: int) -> RaySamples:
    """Per-ray marching; empty rays produce zero samples."""
    if ray.empty:
        z = np.zeros(0)
        return RaySamples(np.zeros((0, 3)), z, z, z, z)
    pos, delta, a, t, w = march_rays(
        opacity, ray.origin, ray.direction, ray.t_near, ray.t_far, n_samples
    )
    deltas = np.full(n_samples, delta[0])
    return RaySamples(pos[0], deltas, a[0], t[0], w[0])


def render_channel(samples: RaySamples, values: np.ndarray):
    """Composite per-sample channel values: sum of weight * value (float64)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != samples.count:
        raise ValidationError(
            f"{values.shape[0]} channel values for {samples.count} samples"
        )
    if values.ndim == 1:
        return float(np.dot(samples.weights, values))
    return samples.weights @ values


def render_view_multi(scene, camera: Camera, grids: list[VoxelGrid | None],
                      n_samples: int | None = None, chunk: int = 8192) -> list[np.ndarray]:
    """Render several channel grids of one view sharing a single ray march.

    Each entry of ``grids`` selects a channel: a scalar grid gives an
    (H, W) image, a channel-last grid gives (H, W, C); ``None`` renders
    accumulated alpha (the per-ray weight sum). Sampling marches the
    scene's opacity grid.
    """
    opacity = scene.opacity_grid
    if n_samples is None:
        n_samples = default_sample_count(opacity)
    H, W = camera.height, camera.width
    uu, vv = np.meshgrid(np.arange(W), np.arange(H))
    pixels = np.stack([uu, vv], axis=-1).reshape(-1, 2).astype(np.float64)

    outs = []
    for grid in grids:
        cshape = () if grid is None else grid.values.shape[3:]
        outs.append(np.zeros((H * W,) + cshape, dtype=np.float64))

    for start in range(0, pixels.shape[0], chunk):
        pix = pixels[start:start + chunk]
        o, d, tn, tf = generate_rays(camera, pix, opacity)
        pos, _, _, _, w = march_rays(opacity, o, d, tn, tf, n_samples)
        for grid, out in zip(grids, outs):
            if grid is None:
                out[start:start + chunk] = w.sum(axis=1)
            else:
                vals = sample_trilinear(grid, pos)
                if vals.ndim == 2:
                    out[start:start + chunk] = (w * vals).sum(axis=1)
                else:
                    out[start:start + chunk] = (w[..., None] * vals).sum(axis=1)
    return [out.reshape((H, W) + out.shape[1:]) for out in outs]


def render_view(scene, camera: Camera, grid: VoxelGrid | None = None,
                n_samples: int | None = None, chunk: int = 8192) -> np.ndarray:
    """Single-channel convenience wrapper around :func:`render_view_multi`."""
    return render_view_multi(scene, camera, [grid], n_samples=n_samples, chunk=chunk)[0]


def max_weight_point(samples: RaySamples, w_min: float = W_MIN_PROJECTION):
    """3D position of the highest-weight sample, or None when all weights
    fall below ``w_min``. Ties resolve to the nearer sample."""
    if samples.count == 0:
        return None
    i = int(np.argmax(samples.weights))  # argmax returns the first maximum
    if samples.weights[i] < w_min:
        return None
    return samples.positions[i].copy()


def max_weight_points(scene, camera: Camera, pixels: np.ndarray,
                      n_samples: int | None = None,
                      w_min: float = W_MIN_PROJECTION,
                      return_weights: bool = False):
    """Vectorized per-pixel projection: (positions (M, 3), valid (M,)).

    With ``return_weights`` the best per-ray weight comes back too, so
    callers can re-threshold validity without re-marching.
    """
    opacity = scene.opacity_grid
    if n_samples is None:
        n_samples = default_sample_count(opacity)
    o, d, tn, tf = generate_rays(camera, pixels, opacity)
    pos, _, _, _, w = march_rays(opacity, o, d, tn, tf, n_samples)
    best = np.argmax(w, axis=1)
    rows = np.arange(w.shape[0])
    best_w = w[rows, best]
    valid = best_w >= w_min
    if return_weights:
        return pos[rows, best], valid, best_w
    return pos[rows, best], valid


def to_png_bytes(image: np.ndarray) -> bytes:
    """Encode a float image in [0, 1] (H, W) or (H, W, 3) as 8-bit PNG."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    arr8 = np.round(arr * 255.0).astype(np.uint8)
    mode = "L" if arr8.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr8, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def write_png(image: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        f.write(to_png_bytes(image))


def write_raw_f32(array: np.ndarray, path) -> None:
    """Raw little-endian float32 dump, row-major, channel-last."""
    np.ascontiguousarray(array, dtype="<f4").tofile(path)
