"""Segmentation network hyperparameters."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict

from ..errors import ValidationError

__all__ = ["NetConfig"]


@dataclass(frozen=True)
class NetConfig:
    depth: int = 3                 # number of stride-2 downsamplings
    base_channels: int = 16
    transformer_layers: int = 2
    model_width: int = 64
    heads: int = 4
    tau: float = 0.15              # |probability - 0.5| band counted uncertain
    quota: float = 0.10            # fraction of voxels eligible for refinement
    token_cap: int = 1152          # hard bound on refinement tokens (9 per voxel)
    in_channels: int = 4

    def __post_init__(self):
        if self.depth < 1:
            raise ValidationError("depth must be >= 1")
        if not (0.0 < self.tau < 0.5):
            raise ValidationError("tau must lie in (0, 0.5)")
        if not (0.0 < self.quota <= 1.0):
            raise ValidationError("quota must lie in (0, 1]")
        if self.model_width % self.heads != 0:
            raise ValidationError("model_width must be divisible by heads")
        if self.base_channels < 1 or self.transformer_layers < 0:
            raise ValidationError("invalid channel/layer counts")
        if self.token_cap < 9:
            raise ValidationError("token_cap must allow at least one voxel (9 tokens)")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "NetConfig":
        return cls(**data)

    @classmethod
    def load(cls, path) -> "NetConfig":
        with open(path) as f:
            return cls.from_json(json.load(f))

    def arch_hash(self, param_shapes: list[tuple[str, tuple]] | None = None) -> str:
        """Stable digest of the architecture; checkpoints embed it so loads
        against a different architecture fail fast."""
        payload = {"config": self.to_json()}
        if param_shapes is not None:
            payload["params"] = [[n, list(s)] for n, s in param_shapes]
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
