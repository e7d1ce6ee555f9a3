"""Scikit-learn style facade over the full engine.

``ClickSegmenter`` is fit on a list of scenes with 2D ground truth and
then predicts 3D masks for unseen scenes from click logs, so the engine
drops into sklearn-flavored pipelines (``get_params``/``set_params``/
``fit``/``predict``/``score``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import NotFittedError, ValidationError
from .guidance import ClickEvent
from .model import NetConfig, SegmentationModel, build_seg_input
from .scene import Scene
from .sceneio import load_scene
from .train import LossConfig, TrainConfig, evaluate, train
from .train.workspace import SceneWorkspace

__all__ = ["ClickSegmenter"]


def _as_scene(obj) -> Scene:
    if isinstance(obj, Scene):
        return obj
    return load_scene(obj)


class ClickSegmenter(BaseEstimator):
    """Interactive 3D segmenter with a fit/predict surface.

    Parameters mirror the network, loss and schedule configuration; see
    :class:`NetConfig`, :class:`LossConfig` and :class:`TrainConfig` for
    semantics. After ``fit`` the trained model lives in ``model_``.
    """

    def __init__(self, iterations=2000, clicks_per_episode=3, interaction_views=5,
                 lr=1e-3, seed=0, lam=1.0, lam1=1.0, lam2=1.0, rays_per_step=1024,
                 depth=3, base_channels=16, transformer_layers=2, model_width=64,
                 heads=4, tau=0.15, quota=0.10, token_cap=1152,
                 n_samples=64, click_stride=2, target_iou=None, check_every=50):
        self.iterations = iterations
        self.clicks_per_episode = clicks_per_episode
        self.interaction_views = interaction_views
        self.lr = lr
        self.seed = seed
        self.lam = lam
        self.lam1 = lam1
        self.lam2 = lam2
        self.rays_per_step = rays_per_step
        self.depth = depth
        self.base_channels = base_channels
        self.transformer_layers = transformer_layers
        self.model_width = model_width
        self.heads = heads
        self.tau = tau
        self.quota = quota
        self.token_cap = token_cap
        self.n_samples = n_samples
        self.click_stride = click_stride
        self.target_iou = target_iou
        self.check_every = check_every

    # -- config assembly ---------------------------------------------------

    def _net_config(self) -> NetConfig:
        return NetConfig(
            depth=self.depth, base_channels=self.base_channels,
            transformer_layers=self.transformer_layers,
            model_width=self.model_width, heads=self.heads,
            tau=self.tau, quota=self.quota, token_cap=self.token_cap,
        )

    def _train_config(self, holdout_views) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations, clicks_per_episode=self.clicks_per_episode,
            interaction_views=self.interaction_views, lr=self.lr, seed=self.seed,
            n_samples=self.n_samples, click_stride=self.click_stride,
            target_iou=self.target_iou, check_every=self.check_every,
            holdout_views=holdout_views or [],
        )

    def _loss_config(self) -> LossConfig:
        return LossConfig(lam=self.lam, lam1=self.lam1, lam2=self.lam2,
                          rays_per_step=self.rays_per_step)

    # -- estimator surface ----------------------------------------------------

    def fit(self, X, y=None, holdout_views=None, log_path=None):
        """Train on a list of scenes (or scene file paths)."""
        scenes = [_as_scene(s) for s in (X if isinstance(X, (list, tuple)) else [X])]
        model, opt, records = train(
            scenes, self._train_config(holdout_views), self._loss_config(),
            self._net_config(), log_path=log_path,
        )
        self.model_ = model
        self.optimizer_ = opt
        self.history_ = records
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit() or load a checkpoint into model_ first")

    def predict(self, X, clicks=None):
        """High-res probability grid(s) for scene(s) given click events.

        ``X`` is a scene or list of scenes; ``clicks`` is a click list (or a
        list of click lists), each entry a :class:`ClickEvent` or its JSON
        dict form.
        """
        self._check_fitted()
        single = not isinstance(X, (list, tuple))
        scenes = [X] if single else list(X)
        if clicks is None:
            raise ValidationError("predict needs click events")
        click_lists = [clicks] if single else list(clicks)
        outs = []
        for scene_obj, events in zip(scenes, click_lists):
            scene = _as_scene(scene_obj)
            ws = SceneWorkspace(scene)
            events = [
                e if isinstance(e, ClickEvent) else ClickEvent.from_json(e)
                for e in events
            ]
            prob = self._replay(ws, events)
            outs.append(prob)
        return outs[0] if single else outs

    def _replay(self, ws: SceneWorkspace, events: list[ClickEvent]) -> np.ndarray:
        ws.guidance.reset()
        m_prev = None
        prob_high = np.full(ws.high_dims, 0.5, dtype=np.float32)
        for event in events:
            ws.guidance.add_click(event)
            x = build_seg_input(ws.scene, ws.guidance.field(), m_prev)
            fw = self.model_.forward(ws.scene, x)
            m_prev = fw.state.prob_low
            prob_high = fw.state.prob_high
        return prob_high

    def score(self, X, y=None, click_budget=5, rng=None):
        """Mean foreground IoU over held-out views with simulated clicks."""
        self._check_fitted()
        scenes = [_as_scene(s) for s in (X if isinstance(X, (list, tuple)) else [X])]
        rng = rng or np.random.default_rng(self.seed)
        ious = []
        for scene in scenes:
            rep = evaluate(scene, self.model_, click_budget=click_budget,
                           rng=rng, image_metrics=False)
            ious.append(rep.mean_iou)
        return float(np.mean(ious))
