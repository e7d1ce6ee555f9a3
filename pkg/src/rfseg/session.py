"""Interactive segmentation sessions.

A session pairs one scene with one checkpointed model and an ordered click
history; the current mask is a pure function of (scene, checkpoint,
clicks), so replaying the history from scratch reproduces any state
bit-exactly. Per-step states are cached so undo is O(1), but the cache is
an optimization only.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from .errors import SessionError, ValidationError
from .guidance import ClickEvent
from .model import SegmentationModel, build_seg_input
from .scene import Scene
from .train.workspace import SceneWorkspace

__all__ = ["Session", "SessionStore"]


@dataclass
class _StepState:
    prob_low: np.ndarray | None
    prob_high: np.ndarray | None


@dataclass
class Session:
    session_id: str
    scene_id: str
    checkpoint_id: str
    scene: Scene
    model: SegmentationModel
    workspace: SceneWorkspace
    clicks: list[ClickEvent] = field(default_factory=list)
    _states: list[_StepState] = field(default_factory=lambda: [_StepState(None, None)])
    _lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def step(self) -> int:
        return len(self.clicks)

    @property
    def prob_high(self) -> np.ndarray | None:
        return self._states[-1].prob_high

    def _acquire(self):
        if not self._lock.acquire(blocking=False):
            raise SessionError("session is busy with another mutation")
        return self._lock

    def apply_click(self, view: int, u: int, v: int, positive: bool) -> np.ndarray:
        """Fold one click into the guidance, rerun the model, return the
        rendered 2D probability mask of the click's view."""
        if not (0 <= view < self.scene.n_views):
            raise ValidationError(f"unknown view {view}")
        cam = self.scene.views[view].camera
        if not (0 <= u < cam.width and 0 <= v < cam.height):
            raise ValidationError(f"click ({u}, {v}) outside view bounds")
        lock = self._acquire()
        try:
            click = ClickEvent(view=view, u=u, v=v, positive=positive, t=self.step + 1)
            self.workspace.guidance.add_click(click)
            m_prev = self._states[-1].prob_low
            x = build_seg_input(self.scene, self.workspace.guidance.field(), m_prev)
            fw = self.model.forward(self.scene, x)
            self.clicks.append(click)
            self._states.append(_StepState(fw.state.prob_low, fw.state.prob_high))
        finally:
            lock.release()
        return self.mask2d(view)

    def undo(self) -> None:
        """Drop the last click and restore the previous state."""
        if not self.clicks:
            raise SessionError("nothing to undo")
        lock = self._acquire()
        try:
            self.clicks.pop()
            self._states.pop()
            # guidance fuses by max, which has no inverse: rebuild it
            self.workspace.guidance.reset()
            for click in self.clicks:
                self.workspace.guidance.add_click(click)
        finally:
            lock.release()

    def replay(self) -> None:
        """Recompute every state from the click log (purity check path)."""
        clicks = list(self.clicks)
        self.workspace.guidance.reset()
        self.clicks = []
        self._states = [_StepState(None, None)]
        for c in clicks:
            self.apply_click(c.view, c.u, c.v, c.positive)

    def mask2d(self, view: int) -> np.ndarray:
        """Rendered probability image of the current mask for one view."""
        if not (0 <= view < self.scene.n_views):
            raise ValidationError(f"unknown view {view}")
        return self.workspace.render_mask2d(view, self.prob_high)

    def mask3d(self) -> np.ndarray:
        """Current high-res probability grid."""
        if self.prob_high is None:
            return np.full(self.workspace.high_dims, 0.5, dtype=np.float64)
        return self.prob_high

    def masked_render(self, view: int) -> np.ndarray:
        """Color render restricted to the predicted foreground."""
        if not (0 <= view < self.scene.n_views):
            raise ValidationError(f"unknown view {view}")
        return self.workspace.render_masked_color(view, self.mask3d())

    def click_log_json(self) -> list[dict]:
        return [c.to_json() for c in self.clicks]

    def save_click_log(self, path) -> None:
        with open(path, "w") as f:
            for c in self.clicks:
                f.write(json.dumps(c.to_json()) + "\n")


class SessionStore:
    """In-memory session registry; distinct sessions mutate independently."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, scene_id: str, checkpoint_id: str, scene: Scene,
               model: SegmentationModel) -> Session:
        session = Session(
            session_id=uuid.uuid4().hex,
            scene_id=scene_id,
            checkpoint_id=checkpoint_id,
            scene=scene,
            model=model,
            workspace=SceneWorkspace(scene),
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionError(f"unknown session {session_id}")
        return session

    def ids(self) -> list[str]:
        with self._lock:
            return list(self._sessions)
