"""Per-pixel feature providers for click propagation.

Features come either from precomputed files (any external extractor) or
from the built-in deterministic toy extractor. Feature files are raw f32,
channel-last, with a JSON sidecar describing dims, channels and provider.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DimensionMismatchError, ValidationError

__all__ = ["FeatureMap", "toy_features", "save_features", "load_features"]

TOY_BLUR_SIGMA = 2.0
TOY_POS_FREQS = (1.0, 2.0)


@dataclass
class FeatureMap:
    """Per-pixel feature vectors, shape (H, W, C)."""

    values: np.ndarray
    provider: str = "unknown"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3:
            raise ValidationError(f"feature map must be (H, W, C), got {self.values.shape}")
        if self.values.shape[2] < 2:
            raise ValidationError("feature maps need at least 2 channels")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("feature values must be finite")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def toy_features(image: np.ndarray) -> FeatureMap:
    """Deterministic color + blur + positional features, L2-normalized.

    Channels: RGB, Gaussian-blurred RGB (sigma 2 px), and sin/cos positional
    encodings of (u, v) at two frequencies. Good enough to separate the
    desk-scale synthetic objects; not a substitute for a learned extractor.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"expected an (H, W, 3) image, got {image.shape}")
    H, W, _ = image.shape

    blurred = gaussian_filter(image, sigma=(TOY_BLUR_SIGMA, TOY_BLUR_SIGMA, 0))

    vv, uu = np.meshgrid(np.arange(H) / H, np.arange(W) / W, indexing="ij")
    pos = []
    for freq in TOY_POS_FREQS:
        for g in (uu, vv):
            pos.append(np.sin(2.0 * np.pi * freq * g))
            pos.append(np.cos(2.0 * np.pi * freq * g))
    feats = np.concatenate([image, blurred, np.stack(pos, axis=-1)], axis=-1)

    norm = np.linalg.norm(feats, axis=-1, keepdims=True)
    feats = feats / norm  # positional sin/cos pairs keep the norm away from 0
    return FeatureMap(feats.astype(np.float32), provider="toy")


def save_features(fmap: FeatureMap, path) -> None:
    path = Path(path)
    np.ascontiguousarray(fmap.values, dtype="<f4").tofile(path)
    sidecar = {
        "height": fmap.height,
        "width": fmap.width,
        "channels": fmap.channels,
        "provider": fmap.provider,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar))


def load_features(path, expect_size: tuple[int, int] | None = None) -> FeatureMap:
    """Load a raw f32 feature file; ``expect_size`` is (height, width)."""
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    H, W, C = int(sidecar["height"]), int(sidecar["width"]), int(sidecar["channels"])
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != H * W * C:
        raise DimensionMismatchError(
            f"{path}: payload has {raw.size} floats, sidecar declares {H}x{W}x{C}"
        )
    if expect_size is not None and (H, W) != tuple(expect_size):
        raise DimensionMismatchError(
            f"{path}: feature size {(H, W)} does not match view {tuple(expect_size)}"
        )
    values = raw.reshape(H, W, C)
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{path}: feature file contains non-finite values")
    return FeatureMap(values, provider=str(sidecar.get("provider", "unknown")))
