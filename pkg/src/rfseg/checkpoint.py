"""Checkpoint container: named parameters plus optimizer state.

Layout (little-endian): magic ``RFSEGCKPT``, u32 version, u32 JSON length +
JSON header (network config, architecture hash, flags), u32 parameter
count, then per parameter: u16 name length + UTF-8 name, u8 ndim,
u32 dims..., f32 payload; if optimizer state is present, per parameter
u64 step count + f64 first and second moments. Round trips bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import Adam
from .errors import ArchitectureMismatchError, CheckpointError
from .model import NetConfig, SegmentationModel

__all__ = ["save_checkpoint", "load_checkpoint", "CKPT_MAGIC", "CKPT_VERSION"]

CKPT_MAGIC = b"RFSEGCKPT"
CKPT_VERSION = 1


def save_checkpoint(model: SegmentationModel, path, optimizer: Adam | None = None,
                    extra: dict | None = None) -> None:
    params = model.parameters()
    header = {
        "config": model.config.to_json(),
        "arch_hash": model.arch_hash(),
        "has_optimizer": optimizer is not None,
        "extra": extra or {},
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<I", CKPT_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            f.write(struct.pack("<H", len(name)))
            f.write(name)
            shape = p.tensor.shape
            f.write(struct.pack("<B", len(shape)))
            f.write(struct.pack(f"<{len(shape)}I", *shape))
            f.write(np.ascontiguousarray(p.values, dtype="<f4").tobytes())
        if optimizer is not None:
            for p in params:
                f.write(struct.pack("<Q", p.step_count))
                f.write(np.ascontiguousarray(p.m, dtype="<f8").tobytes())
                f.write(np.ascontiguousarray(p.v, dtype="<f8").tobytes())


def load_checkpoint(path, expect_arch_hash: str | None = None
                    ) -> tuple[SegmentationModel, dict]:
    """Rebuild a model from a checkpoint; returns (model, header extras)."""
    path = Path(path)
    data = path.read_bytes()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise CheckpointError(f"{path}: truncated checkpoint")
        out = data[off:off + n]
        off += n
        return out

    if take(len(CKPT_MAGIC)) != CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", take(4))
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (blob_len,) = struct.unpack("<I", take(4))
    header = json.loads(take(blob_len).decode("utf-8"))

    config = NetConfig.from_json(header["config"])
    model = SegmentationModel(config, np.random.default_rng(0))
    stored_hash = header.get("arch_hash", "")
    if stored_hash != model.arch_hash():
        raise ArchitectureMismatchError(
            f"{path}: checkpoint architecture {stored_hash} does not match "
            f"the rebuilt model {model.arch_hash()}"
        )
    if expect_arch_hash is not None and stored_hash != expect_arch_hash:
        raise ArchitectureMismatchError(
            f"{path}: architecture {stored_hash} != expected {expect_arch_hash}"
        )

    params = model.parameters()
    (n_params,) = struct.unpack("<I", take(4))
    if n_params != len(params):
        raise CheckpointError(
            f"{path}: {n_params} stored parameters, model defines {len(params)}"
        )
    by_name = {p.name: p for p in params}
    for _ in range(n_params):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        p = by_name.get(name)
        if p is None:
            raise CheckpointError(f"{path}: unknown parameter {name!r}")
        if tuple(p.tensor.shape) != shape:
            raise ArchitectureMismatchError(
                f"{path}: parameter {name} has shape {shape}, expected {p.tensor.shape}"
            )
        count = int(np.prod(shape)) if shape else 1
        p.values = np.frombuffer(take(4 * count), dtype="<f4").reshape(shape).copy()
    if header.get("has_optimizer"):
        for p in params:
            (p.step_count,) = struct.unpack("<Q", take(8))
            count = p.tensor.size
            p.m = np.frombuffer(take(8 * count), dtype="<f8").reshape(p.tensor.shape).copy()
            p.v = np.frombuffer(take(8 * count), dtype="<f8").reshape(p.tensor.shape).copy()
    return model, header
