"""Rendering-based supervision losses.

All three losses act on 2D quantities composited from the 3D prediction
grids along view rays: cross-entropy on rendered logits over the whole
scene, cross-entropy on logits rendered only through the predicted
foreground (which surfaces 3D errors hidden behind dominant background
samples), and an L2 occupancy term on the mask-weighted alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import GridTensor
from ..errors import ValidationError

__all__ = [
    "LossConfig", "RayBatch",
    "render_logits", "render_obj_logits", "render_occupancy",
    "loss_holistic", "loss_obj1", "loss_obj2", "total_loss",
    "LossTerms", "compute_losses",
]


@dataclass
class LossConfig:
    lam: float = 1.0       # scene-holistic CE weight
    lam1: float = 1.0      # object-exclusive CE weight
    lam2: float = 1.0      # object-exclusive occupancy L2 weight
    rays_per_step: float = 1024
    eps: float = 1e-8

    def __post_init__(self):
        if min(self.lam, self.lam1, self.lam2) < 0:
            raise ValidationError("loss weights must be >= 0")


@dataclass
class RayBatch:
    """Precomputed constants for one batch of rays.

    ``corner_idx``/``corner_w`` (8, R*N) sample the high-res grid at the ray
    sample positions; ``weights`` (R, N) are the compositing weights from
    the scene march; ``targets`` (R,) are the 2D ground-truth labels.
    """

    corner_idx: np.ndarray
    corner_w: np.ndarray
    weights: np.ndarray
    targets: np.ndarray

    @property
    def n_rays(self) -> int:
        return self.weights.shape[0]

    @property
    def n_samples(self) -> int:
        return self.weights.shape[1]


def sample_rays(grid_flat: GridTensor, batch: RayBatch) -> GridTensor:
    """Trilinear sampling of a flattened grid tensor at the batch's ray
    sample positions; differentiable w.r.t. the grid. Returns (R, N)."""
    R, N = batch.weights.shape
    vals = ad.gather(grid_flat, batch.corner_idx.reshape(-1))
    vals = ad.reshape(vals, batch.corner_idx.shape)
    vals = ad.weighted_sum(vals, ad.constant(batch.corner_w, like=grid_flat), axis=0)
    return ad.reshape(vals, (R, N))


def render_logits(s_samples: GridTensor, batch: RayBatch) -> GridTensor:
    """Holistic 2D logit: per-ray sum of weight * logit."""
    return ad.weighted_sum(s_samples, ad.constant(batch.weights, like=s_samples), axis=1)


def render_obj_logits(s_samples: GridTensor, m_samples: GridTensor,
                      batch: RayBatch) -> GridTensor:
    """Object-exclusive 2D logit: per-ray sum of mask * weight * logit.

    Compositing weights stay those of the full scene march; the soft mask
    only modulates the contribution, so gradients reach both the logits and
    the mask.
    """
    return ad.weighted_sum(ad.mul(m_samples, s_samples),
                           ad.constant(batch.weights, like=s_samples), axis=1)


def render_occupancy(m_samples: GridTensor, batch: RayBatch) -> GridTensor:
    """Mask-weighted alpha per ray."""
    return ad.weighted_sum(m_samples, ad.constant(batch.weights, like=m_samples), axis=1)


def _bce_mean(logits: GridTensor, targets: np.ndarray) -> GridTensor:
    y = ad.constant(targets, like=logits)
    return ad.tensor_mean(ad.bce_with_logits(logits, y))


def loss_holistic(s_hol: GridTensor, targets: np.ndarray) -> GridTensor:
    return _bce_mean(s_hol, targets)


def loss_obj1(s_obj: GridTensor, targets: np.ndarray) -> GridTensor:
    return _bce_mean(s_obj, targets)


def loss_obj2(occupancy: GridTensor, targets: np.ndarray) -> GridTensor:
    d = ad.sub(occupancy, ad.constant(targets, like=occupancy))
    return ad.tensor_mean(ad.mul(d, d))


def total_loss(l_hol: GridTensor, l_obj1: GridTensor, l_obj2: GridTensor,
               config: LossConfig) -> GridTensor:
    return ad.add(ad.scale(l_hol, config.lam),
                  ad.add(ad.scale(l_obj1, config.lam1), ad.scale(l_obj2, config.lam2)))


@dataclass
class LossTerms:
    total: GridTensor
    holistic: GridTensor
    obj1: GridTensor
    obj2: GridTensor

    def values(self) -> dict:
        return {
            "loss": self.total.item(),
            "loss_hol": self.holistic.item(),
            "loss_obj1": self.obj1.item(),
            "loss_obj2": self.obj2.item(),
        }


def compute_losses(s_high: GridTensor, m_high: GridTensor, batch: RayBatch,
                   config: LossConfig) -> LossTerms:
    """Assemble all three rendering losses from the composed grids."""
    s_samp = sample_rays(s_high, batch)
    l_hol = loss_holistic(render_logits(s_samp, batch), batch.targets)
    if config.lam1 == 0.0 and config.lam2 == 0.0:
        # baseline configuration: keep the mask path out of the graph
        zero = ad.constant(np.zeros(()), like=s_high)
        return LossTerms(total=ad.scale(l_hol, config.lam),
                         holistic=l_hol, obj1=zero, obj2=zero)
    m_samp = sample_rays(m_high, batch)
    l1 = loss_obj1(render_obj_logits(s_samp, m_samp, batch), batch.targets)
    l2 = loss_obj2(render_occupancy(m_samp, batch), batch.targets)
    return LossTerms(total=total_loss(l_hol, l1, l2, config),
                     holistic=l_hol, obj1=l1, obj2=l2)
