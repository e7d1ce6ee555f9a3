"""Click guidance: 2D confidence maps, 2D-to-3D lifting, 3D propagation.

A click spreads over its view through feature cosine similarity, the
resulting confidence map is lifted onto the voxel grid through per-pixel
max-weight ray projections, per-click grids fuse by element-wise max, and
the fused field diffuses through an opacity-aware bilateral filter whose
response is normalized by the filtered splat-coverage mask so sparse
guidance is not diluted by empty space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .features import FeatureMap
from .grids import OpacityGrid, world_to_grid
from .render import max_weight_points
from .scene import Scene

__all__ = [
    "ClickEvent",
    "GuidanceField",
    "GuidanceConfig",
    "similarity_map",
    "lift_confidence",
    "fuse_clicks",
    "propagate_3d",
    "bilateral_weights",
    "GuidancePipeline",
]

EPS_NORM = 1e-8


@dataclass(frozen=True)
class ClickEvent:
    """One user click: view index, pixel, polarity, ordinal position."""

    view: int
    u: int
    v: int
    positive: bool
    t: int = 0

    def to_json(self) -> dict:
        return {
            "view": self.view, "u": self.u, "v": self.v,
            "polarity": "positive" if self.positive else "negative",
            "t": self.t,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ClickEvent":
        pol = data["polarity"]
        if pol not in ("positive", "negative"):
            raise ValidationError(f"unknown polarity {pol!r}")
        return cls(view=int(data["view"]), u=int(data["u"]), v=int(data["v"]),
                   positive=pol == "positive", t=int(data.get("t", 0)))


@dataclass
class GuidanceConfig:
    sigma_alpha: float = 0.2     # opacity-difference kernel width
    sigma_spatial: float = 1.0   # spatial kernel width, voxel units
    passes: int = 3
    splat_mode: str = "cell"     # "cell" (interpolation cell) or "corners"
    # negative clicks only lift where the ray solidly hits a surface:
    # grazing rays at object silhouettes project onto the object's own limb,
    # which would plant negative guidance on the foreground
    neg_lift_min_weight: float = 0.35

    def __post_init__(self):
        if self.sigma_alpha <= 0 or self.sigma_spatial <= 0:
            raise ValidationError("bilateral kernel widths must be > 0")
        if self.passes < 1:
            raise ValidationError("need at least one propagation pass")
        if self.splat_mode not in ("cell", "corners"):
            raise ValidationError(f"unknown splat mode {self.splat_mode!r}")
        if not (0.0 <= self.neg_lift_min_weight < 1.0):
            raise ValidationError("neg_lift_min_weight must lie in [0, 1)")


@dataclass
class GuidanceField:
    """Propagated positive/negative confidence plus coverage, all in [0, 1]."""

    positive: np.ndarray     # P+ after propagation
    negative: np.ndarray     # P- after propagation
    coverage: np.ndarray     # splat coverage before propagation
    fused_positive: np.ndarray = field(repr=False, default=None)  # G+ pre-propagation
    fused_negative: np.ndarray = field(repr=False, default=None)  # G- pre-propagation


def similarity_map(features: FeatureMap, click: ClickEvent) -> np.ndarray:
    """Clamped cosine similarity between the clicked feature and every pixel.

    Negative similarities clamp to 0; dissimilarity is carried by the
    separate negative-click channel, not by negative confidence.
    """
    if not (0 <= click.u < features.width and 0 <= click.v < features.height):
        raise ValidationError(f"click ({click.u}, {click.v}) outside feature map")
    feats = features.values.astype(np.float64)
    f0 = feats[click.v, click.u]
    n0 = np.linalg.norm(f0)
    if n0 == 0.0:
        raise ValidationError("clicked pixel has a zero feature vector")
    norms = np.linalg.norm(feats, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = feats @ f0 / (norms * n0)
    sim = np.where(norms == 0.0, 0.0, sim)
    sim = np.clip(sim, 0.0, 1.0)
    sim[click.v, click.u] = 1.0  # exact self-similarity regardless of rounding
    return sim


def _splat_offsets(frac: np.ndarray, mode: str) -> np.ndarray:
    """Per-point voxel index offsets for the chosen neighbor set, (M, K, 3)."""
    M = frac.shape[0]
    if mode == "corners":
        corner = np.array(
            [[dx, dy, dz] for dx in (-1, 1) for dy in (-1, 1) for dz in (-1, 1)]
        )
        offs = np.concatenate([np.zeros((1, 3), dtype=np.int64), corner], axis=0)
        return np.broadcast_to(offs, (M,) + offs.shape)
    # "cell": the 2x2x2 block of nearest voxel centers around the point,
    # which always contains the enclosing voxel
    side = np.where(frac >= 0.5, 1, -1).astype(np.int64)   # (M, 3)
    offs = np.zeros((M, 8, 3), dtype=np.int64)
    k = 0
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                offs[:, k, 0] = side[:, 0] * dx
                offs[:, k, 1] = side[:, 1] * dy
                offs[:, k, 2] = side[:, 2] * dz
                k += 1
    return offs


def view_projections(scene: Scene, camera, n_samples: int | None = None,
                     w_min: float | None = None):
    """Per-pixel max-weight projections for a whole view: (points, valid,
    best weights). Depends only on the scene geometry, so callers cache it
    per view and re-threshold the validity as needed."""
    H, W = camera.height, camera.width
    uu, vv = np.meshgrid(np.arange(W), np.arange(H))
    pixels = np.stack([uu, vv], axis=-1).reshape(-1, 2).astype(np.float64)
    from .render import W_MIN_PROJECTION
    points, valid, best = max_weight_points(
        scene, camera, pixels, n_samples=n_samples, w_min=0.0, return_weights=True
    )
    threshold = W_MIN_PROJECTION if w_min is None else w_min
    return points, valid & (best >= threshold), best


def lift_confidence(conf2d: np.ndarray, scene: Scene, camera,
                    n_samples: int | None = None,
                    splat_mode: str = "cell",
                    projections=None,
                    min_weight: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Project a 2D confidence map onto the voxel grid.

    Each pixel projects to its max-weight ray sample; its confidence splats
    onto the enclosing voxel and the surrounding neighbor set, fusing by
    max. Returns (confidence grid, coverage grid), both (X, Y, D) float64.
    Pixels whose rays never hit anything contribute nothing.
    """
    conf2d = np.asarray(conf2d, dtype=np.float64)
    H, W = conf2d.shape
    if (H, W) != (camera.height, camera.width):
        raise ValidationError("confidence map size does not match camera")
    grid = scene.opacity_grid
    X, Y, D = grid.dims

    if projections is None:
        points, valid, _ = view_projections(scene, camera, n_samples=n_samples,
                                            w_min=min_weight)
    else:
        points, valid = projections
    conf = conf2d.reshape(-1)
    points, conf = points[valid], conf[valid]
    out = np.zeros((X, Y, D), dtype=np.float64)
    cov = np.zeros((X, Y, D), dtype=np.float64)
    if points.shape[0] == 0:
        return out, cov

    g = world_to_grid(grid, points)              # voxel-center coordinates
    enclosing = np.floor(g + 0.5).astype(np.int64)
    frac = (g + 0.5) - enclosing                 # in [0, 1) within the voxel
    offs = _splat_offsets(frac, splat_mode)      # (M, K, 3)
    targets = enclosing[:, None, :] + offs       # (M, K, 3); includes offset 0

    dims = np.array([X, Y, D])
    tflat = targets.reshape(-1, 3)
    cflat = np.repeat(conf, offs.shape[1])
    inside = np.all((tflat >= 0) & (tflat < dims), axis=1)
    tflat, cflat = tflat[inside], cflat[inside]
    lin = (tflat[:, 0] * Y + tflat[:, 1]) * D + tflat[:, 2]
    np.maximum.at(out.reshape(-1), lin, cflat)
    cov.reshape(-1)[lin] = 1.0
    return out, cov


def fuse_clicks(lifted: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise max over per-click lifted grids and coverage union."""
    if not lifted:
        raise ValidationError("nothing to fuse")
    conf = lifted[0][0].copy()
    cov = lifted[0][1].copy()
    for c, m in lifted[1:]:
        if c.shape != conf.shape:
            raise ValidationError("lifted grids must share dims")
        np.maximum(conf, c, out=conf)
        np.maximum(cov, m, out=cov)
    return conf, cov


def bilateral_weights(opacity: OpacityGrid, sigma_alpha: float,
                      sigma_spatial: float) -> list[tuple[tuple[int, int, int], np.ndarray]]:
    """Precomputed per-offset filter weights over the 3x3x3 neighborhood.

    For each neighbor offset the weight grid holds, at every voxel x, the
    Gaussian spatial falloff times the Gaussian opacity-difference falloff
    between x and x+offset. Out-of-grid neighbors get weight 0. Weights
    depend only on the scene, so they are cached per scene and reused for
    every click and pass.
    """
    a = np.asarray(opacity.values, dtype=np.float64)
    X, Y, D = a.shape
    weights = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                w = np.zeros((X, Y, D), dtype=np.float64)
                sx = slice(max(dx, 0), X + min(dx, 0))
                sy = slice(max(dy, 0), Y + min(dy, 0))
                sz = slice(max(dz, 0), D + min(dz, 0))
                tx = slice(max(-dx, 0), X + min(-dx, 0))
                ty = slice(max(-dy, 0), Y + min(-dy, 0))
                tz = slice(max(-dz, 0), D + min(-dz, 0))
                diff = a[sx, sy, sz] - a[tx, ty, tz]
                g_alpha = np.exp(-(diff ** 2) / (2.0 * sigma_alpha ** 2))
                dist2 = float(dx * dx + dy * dy + dz * dz)
                g_s = np.exp(-dist2 / (2.0 * sigma_spatial ** 2))
                w[tx, ty, tz] = g_alpha * g_s
                weights.append(((dx, dy, dz), w))
    return weights


def _filter_once(field_: np.ndarray, weights) -> np.ndarray:
    """One normalized bilateral pass: weighted neighbor average."""
    X, Y, D = field_.shape
    num = np.zeros_like(field_)
    den = np.zeros_like(field_)
    for (dx, dy, dz), w in weights:
        sx = slice(max(dx, 0), X + min(dx, 0))
        sy = slice(max(dy, 0), Y + min(dy, 0))
        sz = slice(max(dz, 0), D + min(dz, 0))
        tx = slice(max(-dx, 0), X + min(-dx, 0))
        ty = slice(max(-dy, 0), Y + min(-dy, 0))
        tz = slice(max(-dz, 0), D + min(-dz, 0))
        wv = w[tx, ty, tz]
        num[tx, ty, tz] += wv * field_[sx, sy, sz]
        den[tx, ty, tz] += wv
    return num / den  # den > 0: the center offset always contributes


def propagate_3d(fused: np.ndarray, coverage: np.ndarray, opacity: OpacityGrid,
                 sigma_alpha: float = 0.2, sigma_spatial: float = 1.0,
                 passes: int = 3, eps: float = EPS_NORM,
                 weights=None) -> np.ndarray:
    """Diffuse fused guidance through the opacity-aware bilateral filter.

    Guidance and coverage run through the same filter in tandem for
    ``passes`` iterations; the result is their ratio, which keeps values a
    convex combination of covered guidance instead of diluting toward 0
    wherever coverage is sparse.
    """
    if fused.shape != coverage.shape:
        raise ValidationError("guidance and coverage grids must share dims")
    if not np.any(fused):
        return np.zeros_like(np.asarray(fused, dtype=np.float64))
    if weights is None:
        weights = bilateral_weights(opacity, sigma_alpha, sigma_spatial)
    g = np.asarray(fused, dtype=np.float64)
    m = np.asarray(coverage, dtype=np.float64)
    for _ in range(passes):
        g = _filter_once(g, weights)
        m = _filter_once(m, weights)
    return g / (m + eps)


class GuidancePipeline:
    """Per-scene guidance state: cached filter weights and incremental fusion.

    Fusion by max is associative, so a new click only lifts its own map and
    folds it into the running fused grids before re-running propagation.
    """

    def __init__(self, scene: Scene, feature_maps: list[FeatureMap],
                 config: GuidanceConfig | None = None,
                 n_samples: int | None = None):
        self.scene = scene
        self.features = feature_maps
        self.config = config or GuidanceConfig()
        self.n_samples = n_samples
        self.weights = bilateral_weights(
            scene.opacity_grid, self.config.sigma_alpha, self.config.sigma_spatial
        )
        self._proj_cache: dict[int, tuple] = {}
        self.reset()

    def reset(self) -> None:
        X, Y, D = self.scene.dims
        z = np.zeros((X, Y, D), dtype=np.float64)
        self._fused = {True: z.copy(), False: z.copy()}
        self._coverage = z.copy()
        self.n_clicks = 0

    def _projections(self, view: int, positive: bool):
        cached = self._proj_cache.get(view)
        if cached is None:
            cached = view_projections(
                self.scene, self.scene.views[view].camera, n_samples=self.n_samples
            )
            self._proj_cache[view] = cached
        points, valid, best = cached
        if positive:
            return points, valid
        return points, valid & (best >= self.config.neg_lift_min_weight)

    def add_click(self, click: ClickEvent) -> None:
        fmap = self.features[click.view]
        sim = similarity_map(fmap, click)
        conf, cov = lift_confidence(
            sim, self.scene, self.scene.views[click.view].camera,
            n_samples=self.n_samples, splat_mode=self.config.splat_mode,
            projections=self._projections(click.view, click.positive),
        )
        np.maximum(self._fused[click.positive], conf, out=self._fused[click.positive])
        np.maximum(self._coverage, cov, out=self._coverage)
        self.n_clicks += 1

    def field(self) -> GuidanceField:
        cfg = self.config
        out = {}
        for pol in (True, False):
            out[pol] = propagate_3d(
                self._fused[pol], self._coverage, self.scene.opacity_grid,
                cfg.sigma_alpha, cfg.sigma_spatial, cfg.passes,
                weights=self.weights,
            )
        return GuidanceField(
            positive=out[True], negative=out[False], coverage=self._coverage.copy(),
            fused_positive=self._fused[True].copy(),
            fused_negative=self._fused[False].copy(),
        )
