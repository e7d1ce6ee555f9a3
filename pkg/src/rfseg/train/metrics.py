"""2D evaluation metrics and the evaluation report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from ..errors import ValidationError

__all__ = ["pixel_accuracy", "foreground_iou", "psnr", "ssim", "EvalReport"]

PSNR_CAP = 99.0


def pixel_accuracy(pred: np.ndarray, gt: np.ndarray) -> float:
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ValidationError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    return float((pred == gt).mean())


def foreground_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union of the foreground; 1.0 when both are empty."""
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ValidationError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = (pred | gt).sum()
    if union == 0:
        return 1.0
    return float((pred & gt).sum() / union)


def psnr(reference: np.ndarray, image: np.ndarray) -> float:
    value = peak_signal_noise_ratio(
        np.asarray(reference, dtype=np.float64),
        np.asarray(image, dtype=np.float64),
        data_range=1.0,
    )
    return float(min(value, PSNR_CAP))


def ssim(reference: np.ndarray, image: np.ndarray) -> float:
    ref = np.asarray(reference, dtype=np.float64)
    img = np.asarray(image, dtype=np.float64)
    kwargs = {"data_range": 1.0}
    if ref.ndim == 3:
        kwargs["channel_axis"] = 2
    side = min(ref.shape[0], ref.shape[1])
    if side < 7:
        kwargs["win_size"] = side if side % 2 == 1 else side - 1
    return float(structural_similarity(ref, img, **kwargs))


@dataclass
class ViewMetrics:
    view: int
    acc: float
    iou: float
    psnr: float | None = None
    ssim: float | None = None


@dataclass
class EvalReport:
    """Per-view and aggregate quality after an interactive episode."""

    scene: str = ""
    clicks_used: int = 0
    per_view: list[ViewMetrics] = field(default_factory=list)
    mean_acc: float = 0.0
    mean_iou: float = 0.0
    mean_psnr: float | None = None
    mean_ssim: float | None = None
    iou_curve: list[tuple[int, float]] = field(default_factory=list)  # (clicks, mean IoU)

    def finalize(self) -> "EvalReport":
        if self.per_view:
            self.mean_acc = float(np.mean([m.acc for m in self.per_view]))
            self.mean_iou = float(np.mean([m.iou for m in self.per_view]))
            ps = [m.psnr for m in self.per_view if m.psnr is not None]
            ss = [m.ssim for m in self.per_view if m.ssim is not None]
            self.mean_psnr = float(np.mean(ps)) if ps else None
            self.mean_ssim = float(np.mean(ss)) if ss else None
        return self

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)

    def curve_csv(self) -> str:
        lines = ["clicks,mean_iou"]
        for clicks, iou in self.iou_curve:
            lines.append(f"{clicks},{iou:.6f}")
        return "\n".join(lines) + "\n"
