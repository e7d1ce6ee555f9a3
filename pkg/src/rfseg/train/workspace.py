"""Per-scene working state shared by training, evaluation and sessions.

Caches everything that depends only on the scene: per-view feature maps,
guidance filter weights, and per-view ray marches (sample coordinates and
compositing weights), so that repeated mask renders and loss batches cost
a few gathers instead of a fresh march.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..features import FeatureMap, load_features, toy_features
from ..grids import sample_trilinear_flat, trilinear_corner_indices
from ..guidance import GuidanceConfig, GuidancePipeline
from ..render import default_sample_count, generate_rays, march_rays
from ..scene import Scene
from .losses import RayBatch

__all__ = ["SceneWorkspace"]

MASK_THRESHOLD = 0.5


class _ViewCache:
    __slots__ = ("coords_high", "weights", "alpha")

    def __init__(self, coords_high, weights, alpha):
        self.coords_high = coords_high  # (H*W*N, 3) f32, high-grid voxel coords
        self.weights = weights          # (H*W, N) f32 compositing weights
        self.alpha = alpha              # (H, W) f64 accumulated alpha


class SceneWorkspace:
    def __init__(self, scene: Scene, guidance_config: GuidanceConfig | None = None,
                 n_samples: int | None = None, rng: np.random.Generator | None = None):
        if not scene.views:
            raise ValidationError("scene has no views")
        self.scene = scene
        self.n_samples = n_samples or default_sample_count(scene.opacity_grid)
        self.features: list[FeatureMap] = []
        for view in scene.views:
            if view.feature_path is not None:
                self.features.append(
                    load_features(view.feature_path,
                                  expect_size=(view.camera.height, view.camera.width))
                )
            else:
                self.features.append(toy_features(view.image))
        self.guidance = GuidancePipeline(scene, self.features,
                                         config=guidance_config,
                                         n_samples=self.n_samples)
        self._views: dict[int, _ViewCache] = {}
        X, Y, D = scene.dims
        self.high_dims = (2 * X, 2 * Y, 2 * D)

    # -- cached per-view marches -------------------------------------------

    def _view(self, view: int) -> _ViewCache:
        cached = self._views.get(view)
        if cached is not None:
            return cached
        cam = self.scene.views[view].camera
        grid = self.scene.opacity_grid
        H, W = cam.height, cam.width
        uu, vv = np.meshgrid(np.arange(W), np.arange(H))
        pixels = np.stack([uu, vv], axis=-1).reshape(-1, 2).astype(np.float64)
        o, d, tn, tf = generate_rays(cam, pixels, grid)
        pos, _, _, _, w = march_rays(grid, o, d, tn, tf, self.n_samples)
        # voxel-center coordinates in the 2x grid; the low grid reuses them
        # through g_low = g_high / 2 - 0.25
        g_high = (pos.reshape(-1, 3) - grid.origin) / (grid.voxel_size / 2.0) - 0.5
        cache = _ViewCache(
            coords_high=g_high.astype(np.float32),
            weights=w.astype(np.float32),
            alpha=w.sum(axis=1).reshape(H, W),
        )
        self._views[view] = cache
        return cache

    def _coords_low(self, coords_high: np.ndarray) -> np.ndarray:
        return coords_high.astype(np.float64) / 2.0 - 0.25

    # -- renders -------------------------------------------------------------

    def render_mask2d(self, view: int, prob_high: np.ndarray | None,
                      stride: int = 1) -> np.ndarray:
        """Mask-weighted alpha image of a high-res probability grid.

        ``None`` stands for the uniform 0.5 initial state. ``stride``
        subsamples the pixel grid (used to keep training-time click
        placement cheap; metrics always render at full resolution).
        """
        vc = self._view(view)
        cam = self.scene.views[view].camera
        H, W = cam.height, cam.width
        if prob_high is None:
            return 0.5 * vc.alpha[::stride, ::stride]
        weights = vc.weights
        coords = vc.coords_high
        if stride > 1:
            N = self.n_samples
            weights = weights.reshape(H, W, N)[::stride, ::stride].reshape(-1, N)
            coords = coords.reshape(H, W, N, 3)[::stride, ::stride].reshape(-1, 3)
        m = sample_trilinear_flat(np.asarray(prob_high), coords.astype(np.float64))
        m = m.reshape(weights.shape)
        out = (weights * m).sum(axis=1)
        return out.reshape(-(-H // stride), -(-W // stride))

    def render_masked_color(self, view: int, mask_grid: np.ndarray,
                            mask_is_high: bool = True) -> np.ndarray:
        """Foreground-only color render: per-sample mask * weight * color."""
        if self.scene.color_grid is None:
            raise ValidationError("scene has no color grid")
        vc = self._view(view)
        cam = self.scene.views[view].camera
        g_high = vc.coords_high.astype(np.float64)
        g_low = self._coords_low(vc.coords_high)
        m = sample_trilinear_flat(np.asarray(mask_grid), g_high if mask_is_high else g_low)
        c = sample_trilinear_flat(self.scene.color_grid.values, g_low)
        contrib = (vc.weights.reshape(-1)[:, None] * m[:, None] * c)
        contrib = contrib.reshape(vc.weights.shape + (3,))
        return contrib.sum(axis=1).reshape(cam.height, cam.width, 3)

    def pred_mask2d(self, view: int, prob_high: np.ndarray | None,
                    stride: int = 1) -> np.ndarray:
        return self.render_mask2d(view, prob_high, stride=stride) > MASK_THRESHOLD

    def gt_mask2d(self, view: int, stride: int = 1) -> np.ndarray:
        gt = self.scene.views[view].gt_mask2d
        if gt is None:
            raise ValidationError(f"view {view} has no 2D ground truth")
        return gt[::stride, ::stride] > MASK_THRESHOLD

    # -- loss batches ----------------------------------------------------------

    def loss_ray_batch(self, view: int, rng: np.random.Generator,
                       n_rays: int) -> RayBatch:
        """Uniformly sampled pixel rays of one view with precomputed
        interpolation constants against the high-res grid."""
        vc = self._view(view)
        cam = self.scene.views[view].camera
        n_pix = cam.height * cam.width
        n_rays = min(n_rays, n_pix)
        pix = rng.choice(n_pix, size=n_rays, replace=False)
        pix.sort()

        N = self.n_samples
        sample_rows = (pix[:, None] * N + np.arange(N)).reshape(-1)
        coords = vc.coords_high[sample_rows].astype(np.float64)
        idx, w = trilinear_corner_indices(self.high_dims, coords)
        gt = self.gt_mask2d(view).reshape(-1)[pix].astype(np.float32)
        return RayBatch(
            corner_idx=idx,
            corner_w=w.astype(np.float32),
            weights=vc.weights[pix],
            targets=gt,
        )
