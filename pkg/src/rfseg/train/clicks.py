"""Programmatic click simulation against ground-truth 2D masks."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ValidationError
from ..guidance import ClickEvent

__all__ = ["simulate_click"]

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def simulate_click(pred_mask: np.ndarray, gt_mask: np.ndarray,
                   rng: np.random.Generator, view: int = 0,
                   t: int = 0, min_component: int = 1) -> ClickEvent | None:
    """Click the interior of the largest mis-predicted region.

    The error map is pred XOR gt; its largest 4-connected component is
    selected and the click lands on the component pixel farthest from the
    component boundary (Euclidean distance transform), ties broken by rng.
    A false-negative region yields a positive click, a false-positive
    region a negative one. Returns None when prediction and ground truth
    agree everywhere, or when the largest error component is smaller than
    ``min_component`` pixels (sub-pixel boundary slivers produce grazing
    rays whose 3D projections land on the wrong surface, so training
    treats them as converged).
    """
    pred = np.asarray(pred_mask).astype(bool)
    gt = np.asarray(gt_mask).astype(bool)
    if pred.shape != gt.shape:
        raise ValidationError(f"mask shapes differ: {pred.shape} vs {gt.shape}")

    error = pred ^ gt
    if not error.any():
        return None

    labels, n = ndimage.label(error, structure=FOUR_CONNECTED)
    sizes = np.bincount(labels.reshape(-1))
    sizes[0] = 0
    comp = int(np.argmax(sizes))  # ties resolve to the lowest label
    if sizes[comp] < min_component:
        return None
    region = labels == comp

    dist = ndimage.distance_transform_edt(region)
    best = dist.max()
    cand_v, cand_u = np.nonzero(dist == best)
    pick = int(rng.integers(len(cand_u))) if len(cand_u) > 1 else 0
    v, u = int(cand_v[pick]), int(cand_u[pick])

    positive = bool(gt[v, u])  # false negative -> positive click
    return ClickEvent(view=view, u=u, v=v, positive=positive, t=t)
