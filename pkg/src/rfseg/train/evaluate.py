"""Interactive-episode evaluation with simulated clicks."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..model import SegmentationModel, build_seg_input
from ..scene import Scene
from .clicks import simulate_click
from .metrics import EvalReport, ViewMetrics, foreground_iou, pixel_accuracy, psnr, ssim
from .workspace import SceneWorkspace

__all__ = ["run_episode", "evaluate", "default_view_split"]


def default_view_split(n_views: int, interaction_views: int = 5):
    """Interleaved split: clicks go to views spread around the camera ring
    so every held-out view has supervised neighbors."""
    k = min(interaction_views, max(1, n_views - 1))
    picked = sorted({int(round(i * n_views / k)) % n_views for i in range(k)})
    while len(picked) < k:  # rounding collisions on tiny view counts
        extra = next(v for v in range(n_views) if v not in picked)
        picked = sorted(picked + [extra])
    held = [v for v in range(n_views) if v not in picked]
    return picked, held


def _mean_iou(ws: SceneWorkspace, views, prob_high) -> float:
    vals = [foreground_iou(ws.pred_mask2d(v, prob_high), ws.gt_mask2d(v)) for v in views]
    return float(np.mean(vals)) if vals else 0.0


def run_episode(ws: SceneWorkspace, model: SegmentationModel, budget: int,
                rng: np.random.Generator, interaction_views,
                curve_views=None):
    """Run up to ``budget`` simulated clicks, always clicking the interaction
    view with the largest current error region.

    Returns (prob_high, clicks_used, curve) where curve holds
    (clicks, mean IoU over curve_views) after every click.
    """
    ws.guidance.reset()
    m_prev = None
    prob_high = None
    curve = []
    used = 0
    for t in range(1, budget + 1):
        best_view, best_err = None, -1
        for v in interaction_views:
            err = np.count_nonzero(ws.pred_mask2d(v, prob_high) ^ ws.gt_mask2d(v))
            if err > best_err:
                best_view, best_err = v, err
        click = simulate_click(
            ws.pred_mask2d(best_view, prob_high), ws.gt_mask2d(best_view),
            rng, view=best_view, t=t,
        )
        if click is None:
            break
        ws.guidance.add_click(click)
        x = build_seg_input(ws.scene, ws.guidance.field(), m_prev)
        fw = model.forward(ws.scene, x)
        m_prev = fw.state.prob_low
        prob_high = fw.state.prob_high
        used = t
        if curve_views is not None:
            curve.append((t, _mean_iou(ws, curve_views, prob_high)))
    return prob_high, used, curve


def evaluate(scene: Scene, model: SegmentationModel, click_budget: int,
             interaction_views=None, eval_views=None,
             rng: np.random.Generator | None = None,
             image_metrics: bool = True, name: str = "",
             workspace: SceneWorkspace | None = None) -> EvalReport:
    """Interactive evaluation: simulated clicks on interaction views,
    metrics on held-out views, plus foreground-render quality."""
    ws = workspace or SceneWorkspace(scene)
    if interaction_views is None or eval_views is None:
        i_def, e_def = default_view_split(scene.n_views)
        interaction_views = i_def if interaction_views is None else interaction_views
        eval_views = e_def if eval_views is None else eval_views
    if not eval_views:
        raise ValidationError("no held-out views to evaluate on")
    rng = rng or np.random.default_rng(0)

    prob_high, used, curve = run_episode(
        ws, model, click_budget, rng, interaction_views, curve_views=eval_views
    )

    report = EvalReport(scene=name, clicks_used=used, iou_curve=curve)
    gt_occ = scene.gt_occupancy_grid()
    for v in eval_views:
        pred = ws.pred_mask2d(v, prob_high)
        gt = ws.gt_mask2d(v)
        vm = ViewMetrics(view=v, acc=pixel_accuracy(pred, gt), iou=foreground_iou(pred, gt))
        if image_metrics and gt_occ is not None and scene.color_grid is not None:
            mask_grid = prob_high if prob_high is not None \
                else np.full(ws.high_dims, 0.5, dtype=np.float64)
            fg_pred = ws.render_masked_color(v, mask_grid, mask_is_high=True)
            fg_gt = ws.render_masked_color(v, gt_occ.values, mask_is_high=False)
            vm.psnr = psnr(fg_gt, fg_pred)
            vm.ssim = ssim(fg_gt, fg_pred)
        report.per_view.append(vm)
    return report.finalize()
