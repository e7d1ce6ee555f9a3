"""Pinhole camera model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = ["Camera", "look_at"]


@dataclass
class Camera:
    """Calibrated pinhole camera.

    ``rotation`` (3x3) and ``translation`` (3,) form the camera-to-world
    pose: a camera-space direction ``d`` maps to ``rotation @ d`` in world
    space and the camera center sits at ``translation``. The camera looks
    along its +z axis; pixel ``(u, v)`` indexes column ``u`` and row ``v``.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError(f"focal lengths must be > 0, got fx={self.fx} fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image size must be positive")
        if self.rotation.shape != (3, 3):
            raise ValidationError(f"rotation must be 3x3, got {self.rotation.shape}")
        if self.translation.shape != (3,):
            raise ValidationError(f"translation must be a 3-vector, got {self.translation.shape}")
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > 1e-9:
            raise ValidationError(f"rotation is not orthonormal (|R^T R - I| = {err:.3e})")

    def pixel_directions(self, pixels: np.ndarray) -> np.ndarray:
        """Unit world-space ray directions through pixel centers.

        ``pixels`` has shape (..., 2) holding (u, v).
        """
        pixels = np.asarray(pixels, dtype=np.float64)
        u = pixels[..., 0]
        v = pixels[..., 1]
        d = np.stack(
            [
                (u + 0.5 - self.cx) / self.fx,
                (v + 0.5 - self.cy) / self.fy,
                np.ones_like(u),
            ],
            axis=-1,
        )
        d = d @ self.rotation.T
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def to_json(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "rotation": self.rotation.reshape(-1).tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Camera":
        return cls(
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            width=int(data["width"]),
            height=int(data["height"]),
            rotation=np.asarray(data["rotation"], dtype=np.float64).reshape(3, 3),
            translation=np.asarray(data["translation"], dtype=np.float64),
        )


def look_at(position: np.ndarray, target: np.ndarray, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera-to-world rotation for a camera at ``position`` looking at ``target``.

    Columns are the camera's x (right), y (down), z (forward) axes in world
    space. ``up`` picks the world direction that maps near image-up.
    """
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    forward = target - position
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise ValidationError("camera position coincides with target")
    forward = forward / n
    upv = np.asarray(up, dtype=np.float64)
    right = np.cross(forward, upv)
    rn = np.linalg.norm(right)
    if rn < 1e-12:
        # forward parallel to up: pick an arbitrary perpendicular axis
        upv = np.array([1.0, 0.0, 0.0]) if abs(forward[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        right = np.cross(forward, upv)
        rn = np.linalg.norm(right)
    right = right / rn
    down = np.cross(forward, right)
    return np.stack([right, down, forward], axis=1)
