"""Training, click simulation, losses, metrics and evaluation."""

from .clicks import simulate_click
from .evaluate import default_view_split, evaluate, run_episode
from .loop import TrainConfig, train
from .losses import (
    LossConfig,
    RayBatch,
    compute_losses,
    loss_holistic,
    loss_obj1,
    loss_obj2,
    render_logits,
    render_obj_logits,
    render_occupancy,
    sample_rays,
    total_loss,
)
from .metrics import EvalReport, foreground_iou, pixel_accuracy, psnr, ssim
from .workspace import SceneWorkspace

__all__ = [
    "simulate_click", "evaluate", "run_episode", "default_view_split",
    "TrainConfig", "train",
    "LossConfig", "RayBatch", "compute_losses", "sample_rays",
    "render_logits", "render_obj_logits", "render_occupancy",
    "loss_holistic", "loss_obj1", "loss_obj2", "total_loss",
    "EvalReport", "foreground_iou", "pixel_accuracy", "psnr", "ssim",
    "SceneWorkspace",
]
