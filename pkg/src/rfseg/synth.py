"""Synthetic scene generation with exact 3D ground truth."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .cameras import Camera, look_at
from .errors import ValidationError
from .grids import ColorGrid, DensityGrid
from .render import render_view_multi
from .scene import Scene, View

__all__ = ["Primitive", "SyntheticSpec", "make_synthetic_scene", "random_spec"]

MASK_THRESHOLD = 0.5


@dataclass
class Primitive:
    """A solid sphere or axis-aligned box painted into the grid.

    ``size`` is the radius for spheres and the per-axis half extent for
    boxes (a scalar gives a cube). Coordinates are in world units.
    """

    kind: str                    # "sphere" | "box"
    center: tuple[float, float, float]
    size: float | tuple[float, float, float]
    density: float = 4.0
    color: tuple[float, float, float] = (0.8, 0.8, 0.8)
    foreground: bool = False

    def __post_init__(self):
        if self.kind not in ("sphere", "box"):
            raise ValidationError(f"unknown primitive kind {self.kind!r}")
        self.center = tuple(float(c) for c in self.center)
        self.color = tuple(float(c) for c in self.color)
        self.size = float(self.size) if np.isscalar(self.size) \
            else tuple(float(s) for s in self.size)
        if self.density < 0:
            raise ValidationError("primitive density must be >= 0")

    def half_extent(self) -> np.ndarray:
        if np.isscalar(self.size):
            return np.full(3, float(self.size))
        return np.asarray(self.size, dtype=np.float64)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership test for world points, shape (..., 3)."""
        rel = np.asarray(points, dtype=np.float64) - np.asarray(self.center)
        if self.kind == "sphere":
            return (rel ** 2).sum(axis=-1) <= float(self.size) ** 2
        if self.kind == "box":
            return np.all(np.abs(rel) <= self.half_extent(), axis=-1)
        raise ValidationError(f"unknown primitive kind {self.kind!r}")


@dataclass
class SyntheticSpec:
    """Recipe for a deterministic synthetic scene.

    Primitives are painted in list order; the last primitive covering a
    voxel wins. ``background`` primitives are painted before ``primitives``
    and are never foreground.
    """

    dims: tuple[int, int, int] = (32, 32, 32)
    primitives: list[Primitive] = field(default_factory=list)
    background: list[Primitive] = field(default_factory=list)
    seed: int = 0
    voxel_size: float = 1.0
    n_views: int = 8
    image_size: int = 64
    camera_distance: float | None = None   # defaults to 1.05 * grid diagonal
    camera_elevation_deg: float = 28.0
    density_noise: float = 0.0             # per-voxel density jitter (seeded)

    def __post_init__(self):
        for p in self.background:
            p.foreground = False
        if not any(p.foreground for p in self.primitives):
            raise ValidationError("spec needs at least one foreground primitive")
        lo = np.zeros(3)
        hi = np.asarray(self.dims, dtype=np.float64) * self.voxel_size
        for p in list(self.background) + list(self.primitives):
            c = np.asarray(p.center, dtype=np.float64)
            h = p.half_extent() if p.kind == "box" else np.full(3, float(p.size))
            if np.any(c - h < lo) or np.any(c + h > hi):
                raise ValidationError(f"primitive at {p.center} extends outside the grid")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "SyntheticSpec":
        data = dict(data)
        data["primitives"] = [Primitive(**p) for p in data.get("primitives", [])]
        data["background"] = [Primitive(**p) for p in data.get("background", [])]
        data["dims"] = tuple(data["dims"])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SyntheticSpec":
        with open(path) as f:
            return cls.from_json(json.load(f))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)


def _ring_cameras(spec: SyntheticSpec) -> list[Camera]:
    """Evenly spaced cameras on a ring looking at the grid center."""
    extent = np.asarray(spec.dims, dtype=np.float64) * spec.voxel_size
    center = extent / 2.0
    dist = spec.camera_distance
    if dist is None:
        dist = 1.05 * float(np.linalg.norm(extent))
    elev = np.deg2rad(spec.camera_elevation_deg)
    size = spec.image_size
    focal = 1.45 * size  # keeps the whole grid inside the frustum
    cams = []
    for i in range(spec.n_views):
        az = 2.0 * np.pi * i / spec.n_views
        pos = center + dist * np.array(
            [np.cos(az) * np.cos(elev), np.sin(az) * np.cos(elev), np.sin(elev)]
        )
        cams.append(
            Camera(
                fx=focal, fy=focal, cx=size / 2.0, cy=size / 2.0,
                width=size, height=size,
                rotation=look_at(pos, center), translation=pos,
            )
        )
    return cams


def make_synthetic_scene(spec: SyntheticSpec) -> Scene:
    """Paint primitives into grids, render reference views, attach ground truth.

    The 3D mask marks exactly the voxels whose density was last written by a
    foreground primitive; 2D masks come from occupancy-rendering that mask
    and thresholding at 0.5.
    """
    X, Y, D = spec.dims
    h = spec.voxel_size
    density = np.zeros((X, Y, D), dtype=np.float32)
    color = np.zeros((X, Y, D, 3), dtype=np.float32)
    fg = np.zeros((X, Y, D), dtype=bool)

    ii, jj, kk = np.meshgrid(np.arange(X), np.arange(Y), np.arange(D), indexing="ij")
    centers = (np.stack([ii, jj, kk], axis=-1).astype(np.float64) + 0.5) * h

    for prim in list(spec.background) + list(spec.primitives):
        inside = prim.contains(centers)
        density[inside] = np.float32(prim.density)
        color[inside] = np.asarray(prim.color, dtype=np.float32)
        fg[inside] = prim.foreground

    if spec.density_noise > 0.0:
        rng = np.random.default_rng(spec.seed)
        jitter = rng.uniform(0.0, spec.density_noise, size=density.shape).astype(np.float32)
        density = np.where(density > 0, density + jitter, density)

    density_grid = DensityGrid(density, voxel_size=h)
    color_grid = ColorGrid(color, voxel_size=h)
    scene = Scene(density_grid=density_grid, color_grid=color_grid, gt_mask3d=fg)

    gt_occ = scene.gt_occupancy_grid()
    for cam in _ring_cameras(spec):
        image, occ = render_view_multi(scene, cam, [color_grid, gt_occ])
        mask = (occ > MASK_THRESHOLD).astype(np.float32)
        scene.views.append(View(camera=cam, image=image.astype(np.float32), gt_mask2d=mask))
    return scene


def random_spec(rng: np.random.Generator, dims=(32, 32, 32),
                n_views: int = 8, image_size: int = 64) -> SyntheticSpec:
    """Randomized desk-scale scene: one foreground object plus clutter."""
    dims = tuple(dims)
    extent = np.asarray(dims, dtype=np.float64)
    center = extent / 2.0

    def rand_color():
        return tuple(np.round(rng.uniform(0.15, 1.0, size=3), 4).tolist())

    fg_kind = "sphere" if rng.random() < 0.5 else "box"
    fg_size = float(rng.uniform(0.14, 0.22) * extent.min())
    fg_center = tuple((center + rng.uniform(-0.08, 0.08, size=3) * extent).tolist())
    prims = [
        Primitive(kind=fg_kind, center=fg_center, size=fg_size,
                  density=float(rng.uniform(3.0, 6.0)), color=rand_color(),
                  foreground=True)
    ]

    background = []
    # floor slab under the object
    floor_h = float(rng.uniform(0.04, 0.08) * extent[2])
    background.append(
        Primitive(
            kind="box",
            center=(center[0], center[1], floor_h),
            size=(extent[0] / 2.0 - 1.0, extent[1] / 2.0 - 1.0, floor_h - 0.25),
            density=float(rng.uniform(2.0, 5.0)),
            color=rand_color(),
        )
    )
    for _ in range(int(rng.integers(1, 4))):
        kind = "sphere" if rng.random() < 0.5 else "box"
        size = float(rng.uniform(0.06, 0.11) * extent.min())
        # clutter sits away from the foreground object
        for _ in range(20):
            pos = rng.uniform(0.2, 0.8, size=3) * extent
            pos[2] = max(pos[2], 2 * floor_h + size + 1.0)
            if np.linalg.norm(pos - np.asarray(fg_center)) > fg_size + size + 2.0:
                break
        lo = np.full(3, size + 0.5)
        hi = extent - size - 0.5
        pos = np.clip(pos, lo, hi)
        if np.linalg.norm(pos - np.asarray(fg_center)) <= fg_size + size:
            continue
        background.append(
            Primitive(kind=kind, center=tuple(pos.tolist()), size=size,
                      density=float(rng.uniform(2.0, 6.0)), color=rand_color())
        )

    return SyntheticSpec(
        dims=dims, primitives=prims, background=background,
        seed=int(rng.integers(0, 2**31 - 1)),
        n_views=n_views, image_size=image_size,
    )
