"""HTTP API for the interactive segmentation UI and scripted clients."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .checkpoint import load_checkpoint
from .errors import (
    ArchitectureMismatchError,
    CheckpointError,
    SceneFormatError,
    SessionError,
    ValidationError,
)
from .render import to_png_bytes
from .sceneio import load_scene
from .session import SessionStore

__all__ = ["create_app"]


class CreateSessionBody(BaseModel):
    scene: str
    checkpoint: str


class ClickBody(BaseModel):
    view: int
    u: int
    v: int
    polarity: str


class _Registry:
    """Lazy, cached access to scenes and checkpoints under the data dir."""

    def __init__(self, data_dir: Path):
        self.scene_dir = data_dir / "scenes"
        self.ckpt_dir = data_dir / "checkpoints"
        self._scenes = {}
        self._models = {}

    def scene_ids(self):
        if not self.scene_dir.is_dir():
            return []
        return sorted(p.stem for p in self.scene_dir.glob("*.rfs"))

    def checkpoint_ids(self):
        if not self.ckpt_dir.is_dir():
            return []
        return sorted(p.stem for p in self.ckpt_dir.glob("*.ckpt"))

    def scene(self, scene_id: str):
        if scene_id not in self._scenes:
            path = self.scene_dir / f"{scene_id}.rfs"
            if not path.exists():
                raise HTTPException(404, f"unknown scene {scene_id!r}")
            try:
                self._scenes[scene_id] = load_scene(path)
            except SceneFormatError as e:
                raise HTTPException(500, f"scene {scene_id!r} unreadable: {e}")
        return self._scenes[scene_id]

    def model(self, ckpt_id: str):
        if ckpt_id not in self._models:
            path = self.ckpt_dir / f"{ckpt_id}.ckpt"
            if not path.exists():
                raise HTTPException(404, f"unknown checkpoint {ckpt_id!r}")
            try:
                model, _ = load_checkpoint(path)
            except ArchitectureMismatchError as e:
                raise HTTPException(409, str(e))
            except CheckpointError as e:
                raise HTTPException(500, f"checkpoint {ckpt_id!r} unreadable: {e}")
            self._models[ckpt_id] = model
        return self._models[ckpt_id]


def _png_response(image: np.ndarray) -> Response:
    return Response(content=to_png_bytes(image), media_type="image/png")


def create_app(data_dir, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="rfseg", version="0.1.0")
    registry = _Registry(Path(data_dir))
    store = SessionStore()

    def get_session(session_id: str):
        try:
            return store.get(session_id)
        except SessionError as e:
            raise HTTPException(404, str(e))

    @app.get("/scenes")
    def list_scenes():
        out = []
        for sid in registry.scene_ids():
            scene = registry.scene(sid)
            out.append({"id": sid, "dims": list(scene.dims), "views": scene.n_views})
        return out

    @app.get("/checkpoints")
    def list_checkpoints():
        return [{"id": cid} for cid in registry.checkpoint_ids()]

    @app.get("/scenes/{scene_id}/views/{view}/image.png")
    def scene_image(scene_id: str, view: int):
        scene = registry.scene(scene_id)
        if not (0 <= view < scene.n_views):
            raise HTTPException(404, f"unknown view {view}")
        return _png_response(scene.views[view].image)

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        scene = registry.scene(body.scene)
        model = registry.model(body.checkpoint)
        session = store.create(body.scene, body.checkpoint, scene, model)
        return _session_state(session)

    def _session_state(session):
        return {
            "id": session.session_id,
            "scene": session.scene_id,
            "checkpoint": session.checkpoint_id,
            "step": session.step,
            "clicks": session.click_log_json(),
            "views": [
                {
                    "index": i,
                    "width": v.camera.width,
                    "height": v.camera.height,
                }
                for i, v in enumerate(session.scene.views)
            ],
        }

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        return _session_state(get_session(session_id))

    @app.get("/sessions/{session_id}/views")
    def session_views(session_id: str):
        return _session_state(get_session(session_id))["views"]

    @app.post("/sessions/{session_id}/clicks")
    def add_click(session_id: str, body: ClickBody):
        session = get_session(session_id)
        if body.polarity not in ("positive", "negative"):
            raise HTTPException(400, f"polarity must be positive|negative, got {body.polarity!r}")
        try:
            session.apply_click(body.view, body.u, body.v, body.polarity == "positive")
        except ValidationError as e:
            raise HTTPException(400, str(e))
        except SessionError as e:
            raise HTTPException(409, str(e))
        return _session_state(session)

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = get_session(session_id)
        try:
            session.undo()
        except SessionError as e:
            if "busy" in str(e):
                raise HTTPException(409, str(e))
            raise HTTPException(400, str(e))
        return _session_state(session)

    @app.get("/sessions/{session_id}/views/{view}/mask.png")
    def mask_png(session_id: str, view: int):
        session = get_session(session_id)
        try:
            return _png_response(session.mask2d(view))
        except ValidationError as e:
            raise HTTPException(404, str(e))

    @app.get("/sessions/{session_id}/views/{view}/render.png")
    def render_png(session_id: str, view: int):
        session = get_session(session_id)
        try:
            return _png_response(session.masked_render(view))
        except ValidationError as e:
            raise HTTPException(404, str(e))

    @app.get("/sessions/{session_id}/mask3d.raw")
    def mask3d_raw(session_id: str):
        session = get_session(session_id)
        grid = session.mask3d()
        # same on-disk order as grid payloads in scene files: X varies fastest
        payload = np.ascontiguousarray(grid.transpose(2, 1, 0), dtype="<f4").tobytes()
        return Response(
            content=payload,
            media_type="application/octet-stream",
            headers={"X-Grid-Dims": "{},{},{}".format(*grid.shape)},
        )

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

        @app.get("/", response_class=HTMLResponse, include_in_schema=False)
        def index_redirect():
            return '<meta http-equiv="refresh" content="0; url=/ui/">'

    return app
