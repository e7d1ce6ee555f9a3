"""Uncertain-voxel selection and transformer refinement across octree levels."""

from __future__ import annotations

import logging
import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import GridTensor, Parameter
from ..errors import ValidationError
from ..grids import sample_trilinear
from .config import NetConfig
from .octree import children_flat

__all__ = ["select_uncertain", "RefineTransformer"]

log = logging.getLogger(__name__)


def select_uncertain(prob: np.ndarray, tau: float, quota: float) -> np.ndarray:
    """Flat indices of voxels whose foreground probability is nearest 0.5.

    Only voxels with |p - 0.5| < tau qualify; the result is ranked by that
    margin ascending, truncated to ceil(quota * voxel_count), with ties
    broken by flat voxel index.
    """
    if not (0.0 < tau < 0.5):
        raise ValidationError("tau must lie in (0, 0.5)")
    if not (0.0 < quota <= 1.0):
        raise ValidationError("quota must lie in (0, 1]")
    margin = np.abs(np.asarray(prob, dtype=np.float64).reshape(-1) - 0.5)
    eligible = np.flatnonzero(margin < tau)
    if eligible.size == 0:
        return eligible
    order = np.lexsort((eligible, margin[eligible]))
    limit = int(math.ceil(quota * margin.size))
    return eligible[order[:limit]]


class RefineTransformer:
    """Joint low/high-level token refinement.

    One token per uncertain low-res voxel plus one per octree child; token
    features combine low-res opacity, high-res opacity sampled at child
    centers, the decoder feature and coarse logit of the parent voxel,
    normalized voxel coordinates and a level flag. Self-attention runs over
    the joint sequence ("hierarchical interaction") and two heads emit
    residual logit corrections per level.
    """

    def __init__(self, config: NetConfig, rng: np.random.Generator):
        self.config = config
        self.params: dict[str, Parameter] = {}
        width = config.model_width
        feat_dim = 7 + config.base_channels  # [A_low, A_child, feat..., s, xyz, level]

        def lin(name, n_in, n_out, zero=False):
            std = 0.0 if zero else np.sqrt(1.0 / n_in)
            w = Parameter(f"refine.{name}.w", rng.normal(0.0, std, size=(n_in, n_out)))
            b = Parameter(f"refine.{name}.b", np.zeros(n_out))
            self.params[w.name] = w
            self.params[b.name] = b
            return w, b

        def norm(name):
            g = Parameter(f"refine.{name}.gain", np.ones(width))
            b = Parameter(f"refine.{name}.bias", np.zeros(width))
            self.params[g.name] = g
            self.params[b.name] = b
            return g, b

        self.embed = lin("embed", feat_dim, width)
        self.layers = []
        for i in range(config.transformer_layers):
            self.layers.append({
                "ln1": norm(f"l{i}.ln1"),
                "q": lin(f"l{i}.q", width, width),
                "k": lin(f"l{i}.k", width, width),
                "v": lin(f"l{i}.v", width, width),
                "o": lin(f"l{i}.o", width, width),
                "ln2": norm(f"l{i}.ln2"),
                "ff1": lin(f"l{i}.ff1", width, 2 * width),
                "ff2": lin(f"l{i}.ff2", 2 * width, width),
            })
        self.final_ln = norm("final_ln")
        # zero-init heads: refinement starts as the identity on coarse logits
        self.head_low = lin("head_low", width, 1, zero=True)
        self.head_high = lin("head_high", width, 1, zero=True)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def cap_uncertain(self, uncertain: np.ndarray) -> np.ndarray:
        max_voxels = self.config.token_cap // 9
        if uncertain.size > max_voxels:
            log.warning(
                "refinement quota re-truncated: %d uncertain voxels exceed the "
                "%d-token cap (keeping %d)",
                uncertain.size, self.config.token_cap, max_voxels,
            )
            return uncertain[:max_voxels]
        return uncertain

    def _tokens(self, scene, uncertain: np.ndarray, s: GridTensor,
                features: GridTensor) -> GridTensor:
        cfg = self.config
        X, Y, D = s.shape
        P = uncertain.size
        child_idx = children_flat(uncertain, (X, Y, D)).reshape(-1)  # (8P,)

        grid = scene.opacity_grid
        a_low = grid.values.reshape(-1)[uncertain]

        # child-center world positions for sparse high-res opacity sampling
        hx = child_idx // ((2 * Y) * (2 * D))
        hy = (child_idx // (2 * D)) % (2 * Y)
        hz = child_idx % (2 * D)
        cc = np.stack([hx, hy, hz], axis=1).astype(np.float64)
        child_pos = grid.origin + (cc + 0.5) * (grid.voxel_size / 2.0)
        a_child = sample_trilinear(grid, child_pos)

        px = uncertain // (Y * D)
        py = (uncertain // D) % Y
        pz = uncertain % D
        low_xyz = (np.stack([px, py, pz], 1) + 0.5) / np.array([X, Y, D])
        high_xyz = (cc + 0.5) / np.array([2 * X, 2 * Y, 2 * D])

        # opacity columns: [A_low, A_child]; trailing columns: [xyz, level]
        pre = np.zeros((9 * P, 2), dtype=np.float32)
        pre[:P, 0] = a_low
        pre[P:, 0] = np.repeat(a_low, 8)
        pre[P:, 1] = a_child
        post = np.zeros((9 * P, 4), dtype=np.float32)
        post[:P, :3] = low_xyz
        post[P:, :3] = high_xyz
        post[P:, 3] = 1.0

        s_flat = ad.reshape(s, (X * Y * D,))
        gather_idx = np.concatenate([uncertain, np.repeat(uncertain, 8)])
        s_tok = ad.reshape(ad.gather(s_flat, gather_idx), (9 * P, 1))
        feat_flat = ad.reshape(features, (cfg.base_channels, X * Y * D))
        f_tok = ad.transpose(ad.gather(feat_flat, gather_idx, axis=1), (1, 0))

        # column layout: [A_low, A_child, feat..., s, xyz, level]
        return ad.concat([ad.constant(pre), f_tok, s_tok, ad.constant(post)], axis=1)

    def forward(self, scene, uncertain: np.ndarray, s: GridTensor,
                features: GridTensor) -> tuple[GridTensor, GridTensor]:
        """Refined logits for the uncertain voxels and their children.

        Returns (refined_low (P,), refined_child (8P,)), residual on the
        coarse logits. ``uncertain`` must already be capped.
        """
        cfg = self.config
        P = uncertain.size
        if P == 0:
            raise ValidationError("refine called with an empty uncertain set")
        heads = cfg.heads
        dh = cfg.model_width // heads

        x = ad.linear(self._tokens(scene, uncertain, s, features),
                      self.embed[0].tensor, self.embed[1].tensor)
        T = 9 * P
        for layer in self.layers:
            h = ad.layer_norm(x, layer["ln1"][0].tensor, layer["ln1"][1].tensor)
            q = ad.linear(h, layer["q"][0].tensor, layer["q"][1].tensor)
            k = ad.linear(h, layer["k"][0].tensor, layer["k"][1].tensor)
            v = ad.linear(h, layer["v"][0].tensor, layer["v"][1].tensor)
            q = ad.transpose(ad.reshape(q, (T, heads, dh)), (1, 0, 2))
            k = ad.transpose(ad.reshape(k, (T, heads, dh)), (1, 0, 2))
            v = ad.transpose(ad.reshape(v, (T, heads, dh)), (1, 0, 2))
            att = ad.softmax(
                ad.scale(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(dh)),
                axis=-1,
            )
            ctx = ad.reshape(ad.transpose(ad.matmul(att, v), (1, 0, 2)), (T, cfg.model_width))
            x = ad.add(x, ad.linear(ctx, layer["o"][0].tensor, layer["o"][1].tensor))
            h2 = ad.layer_norm(x, layer["ln2"][0].tensor, layer["ln2"][1].tensor)
            ff = ad.linear(ad.relu(ad.linear(h2, layer["ff1"][0].tensor, layer["ff1"][1].tensor)),
                           layer["ff2"][0].tensor, layer["ff2"][1].tensor)
            x = ad.add(x, ff)

        x = ad.layer_norm(x, self.final_ln[0].tensor, self.final_ln[1].tensor)
        rows = np.arange(T)
        x_low = ad.gather(x, rows[:P], axis=0)
        x_high = ad.gather(x, rows[P:], axis=0)
        d_low = ad.reshape(ad.linear(x_low, self.head_low[0].tensor, self.head_low[1].tensor), (P,))
        d_high = ad.reshape(ad.linear(x_high, self.head_high[0].tensor, self.head_high[1].tensor), (8 * P,))

        s_flat = ad.reshape(s, (int(np.prod(s.shape)),))
        refined_low = ad.add(ad.gather(s_flat, uncertain), d_low)
        refined_child = ad.add(ad.gather(s_flat, np.repeat(uncertain, 8)), d_high)
        return refined_low, refined_child
