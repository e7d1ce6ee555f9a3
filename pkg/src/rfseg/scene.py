"""Scene container: grids plus calibrated views."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cameras import Camera
from .errors import ValidationError
from .grids import ColorGrid, DensityGrid, OpacityGrid, densities_to_opacity

__all__ = ["View", "Scene"]


@dataclass
class View:
    """One calibrated view: camera, reference image, optional 2D ground truth."""

    camera: Camera
    image: np.ndarray                      # (H, W, 3) float32 in [0, 1]
    gt_mask2d: np.ndarray | None = None    # (H, W) float32 in {0, 1}
    feature_path: str | None = None        # sidecar feature file, if any

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float32)
        if self.image.shape != (self.camera.height, self.camera.width, 3):
            raise ValidationError(
                f"image shape {self.image.shape} does not match camera "
                f"({self.camera.height}, {self.camera.width}, 3)"
            )
        if self.gt_mask2d is not None:
            self.gt_mask2d = np.asarray(self.gt_mask2d, dtype=np.float32)
            if self.gt_mask2d.shape != (self.camera.height, self.camera.width):
                raise ValidationError("gt_mask2d shape does not match camera")


@dataclass
class Scene:
    """Voxel radiance field with rendered reference views.

    The density grid is canonical; the opacity grid is always derived from
    it with step length equal to the voxel size, so density round-trips
    through files bit-exactly and opacity is reproducible.
    """

    density_grid: DensityGrid
    color_grid: ColorGrid | None = None
    views: list[View] = field(default_factory=list)
    gt_mask3d: np.ndarray | None = None    # (X, Y, D) bool
    opacity_grid: OpacityGrid = field(init=False)

    def __post_init__(self):
        self.opacity_grid = densities_to_opacity(self.density_grid)
        if self.color_grid is not None:
            if self.color_grid.dims != self.density_grid.dims:
                raise ValidationError("color grid dims do not match density grid")
        if self.gt_mask3d is not None:
            self.gt_mask3d = np.asarray(self.gt_mask3d, dtype=bool)
            if self.gt_mask3d.shape != self.density_grid.dims:
                raise ValidationError(
                    f"gt_mask3d shape {self.gt_mask3d.shape} does not match "
                    f"grid dims {self.density_grid.dims}"
                )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.density_grid.dims

    @property
    def n_views(self) -> int:
        return len(self.views)

    def gt_occupancy_grid(self) -> OpacityGrid | None:
        """Ground-truth 3D mask as a float grid (for occupancy rendering)."""
        if self.gt_mask3d is None:
            return None
        return OpacityGrid(
            self.gt_mask3d.astype(np.float64),
            voxel_size=self.density_grid.voxel_size,
            origin=self.density_grid.origin,
        )
