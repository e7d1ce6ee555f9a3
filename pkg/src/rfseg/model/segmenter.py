"""Coarse-to-fine segmentation model: U-Net, uncertainty refinement, octree
composition into the 2x-resolution output grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import GridTensor, Parameter
from ..autodiff.ops import _sigmoid_np
from ..errors import ShapeError, ValidationError
from ..guidance import GuidanceField
from ..scene import Scene
from .config import NetConfig
from .octree import children_flat
from .refine import RefineTransformer, select_uncertain
from .unet import UNet3D

__all__ = ["SegState", "SegmentationModel", "compose_highres", "build_seg_input"]


@dataclass
class SegState:
    """Outputs of one segmentation pass (numpy views over forward tensors)."""

    logits_low: np.ndarray          # (X, Y, D), post-refinement at uncertain voxels
    prob_low: np.ndarray            # sigmoid of logits_low
    uncertain: np.ndarray           # flat low-res indices actually refined
    refined_low: np.ndarray         # (P,) refined logits for uncertain voxels
    refined_child: np.ndarray       # (8P,) refined child logits
    prob_high: np.ndarray           # (2X, 2Y, 2D) composed probability grid
    logits_high: np.ndarray         # (2X, 2Y, 2D) composed logit grid


@dataclass
class SegForward:
    """Differentiable handles kept alive for the training losses."""

    state: SegState
    s_high: GridTensor
    m_high: GridTensor
    s_low: GridTensor
    m_low: GridTensor


def build_seg_input(scene: Scene, guidance: GuidanceField,
                    m_prev: np.ndarray | None) -> np.ndarray:
    """Stack [opacity, P+, P-, previous mask] into the network input."""
    X, Y, D = scene.dims
    if m_prev is None:
        m_prev = np.full((X, Y, D), 0.5, dtype=np.float32)
    if m_prev.shape != (X, Y, D):
        raise ShapeError(f"previous mask shape {m_prev.shape} != {(X, Y, D)}")
    chans = np.stack([
        scene.opacity_grid.values.astype(np.float32),
        guidance.positive.astype(np.float32),
        guidance.negative.astype(np.float32),
        np.asarray(m_prev, dtype=np.float32),
    ])
    if chans.min() < 0.0 or chans.max() > 1.0:
        raise ValidationError("segmentation input channels must lie in [0, 1]")
    return chans


def compose_highres(prob_low: np.ndarray, uncertain: np.ndarray,
                    refined_low: np.ndarray, refined_child: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Merge coarse probabilities with refined logits.

    Children of certain voxels inherit the parent probability (nearest
    upsampling, bit-exact); children of uncertain voxels take the sigmoid of
    their refined logits; uncertain parents take the sigmoid of their
    refined low-res logits. Returns (prob_low_out, prob_high).
    """
    prob_low = np.asarray(prob_low)
    X, Y, D = prob_low.shape
    high = np.repeat(np.repeat(np.repeat(prob_low, 2, axis=0), 2, axis=1), 2, axis=2)
    low_out = prob_low.copy()
    if uncertain.size:
        if refined_child.shape[0] != 8 * uncertain.size:
            raise ShapeError("refined child logits must cover exactly children(U)")
        cidx = children_flat(uncertain, (X, Y, D)).reshape(-1)
        high.reshape(-1)[cidx] = _sigmoid_np(np.asarray(refined_child, dtype=prob_low.dtype))
        low_out.reshape(-1)[uncertain] = _sigmoid_np(np.asarray(refined_low, dtype=prob_low.dtype))
    return low_out, high


class SegmentationModel:
    """U-Net + refinement transformer with named parameters."""

    def __init__(self, config: NetConfig, rng: np.random.Generator | None = None):
        self.config = config
        rng = rng or np.random.default_rng(0)
        self.unet = UNet3D(config, rng)
        self.refiner = RefineTransformer(config, rng)

    def parameters(self) -> list[Parameter]:
        return self.unet.parameters() + self.refiner.parameters()

    def param_shapes(self) -> list[tuple[str, tuple]]:
        return [(p.name, tuple(p.tensor.shape)) for p in self.parameters()]

    def arch_hash(self) -> str:
        return self.config.arch_hash(self.param_shapes())

    def forward(self, scene: Scene, seg_input: np.ndarray | GridTensor,
                refine: bool = True) -> SegForward:
        """Full pass: coarse logits, uncertainty selection, refinement, and
        differentiable composition of the high-res grids."""
        if isinstance(seg_input, GridTensor):
            x = seg_input
        else:
            x = GridTensor(seg_input.astype(np.float32))
        X, Y, D = x.shape[1:]
        n_low = X * Y * D
        n_high = 8 * n_low
        s, feats = self.unet.forward(x)
        prob = _sigmoid_np(s.values)

        uncertain = np.empty(0, dtype=np.int64)
        if refine:
            uncertain = select_uncertain(prob, self.config.tau, self.config.quota)
            uncertain = self.refiner.cap_uncertain(uncertain)

        s_flat = ad.reshape(s, (n_low,))
        if uncertain.size == 0:
            s_low = s_flat
            s_high = ad.reshape(ad.nearest_upsample2x(s), (n_high,))
            refined_low_np = np.empty(0, dtype=np.float32)
            refined_child_np = np.empty(0, dtype=np.float32)
        else:
            refined_low, refined_child = self.refiner.forward(scene, uncertain, s, feats)
            keep_low = np.ones(n_low, dtype=np.float32)
            keep_low[uncertain] = 0.0
            s_low = ad.add(
                ad.mul(s_flat, ad.constant(keep_low)),
                ad.scatter_add(refined_low, uncertain, n_low),
            )
            cidx = children_flat(uncertain, (X, Y, D)).reshape(-1)
            keep_high = np.ones(n_high, dtype=np.float32)
            keep_high[cidx] = 0.0
            up = ad.reshape(ad.nearest_upsample2x(ad.reshape(s_low, (X, Y, D))), (n_high,))
            s_high = ad.add(
                ad.mul(up, ad.constant(keep_high)),
                ad.scatter_add(refined_child, cidx, n_high),
            )
            refined_low_np = refined_low.values
            refined_child_np = refined_child.values

        m_low = ad.sigmoid(s_low)
        m_high = ad.sigmoid(s_high)

        state = SegState(
            logits_low=s_low.values.reshape(X, Y, D),
            prob_low=m_low.values.reshape(X, Y, D),
            uncertain=uncertain,
            refined_low=refined_low_np,
            refined_child=refined_child_np,
            prob_high=m_high.values.reshape(2 * X, 2 * Y, 2 * D),
            logits_high=s_high.values.reshape(2 * X, 2 * Y, 2 * D),
        )
        return SegForward(state=state, s_high=s_high, m_high=m_high,
                          s_low=s_low, m_low=m_low)
