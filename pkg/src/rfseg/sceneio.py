"""Scene container file format.

Layout (little-endian):

* magic ``RFSEG1``
* u32 version (currently 1)
* u32 dims[3] (X, Y, D)
* f32 voxel_size, f32 origin[3]
* u32 flags: bit 0 color grid, bit 1 3D ground truth, bit 2 2D ground truth
* density payload, f32, X-fastest
* optional color payload, f32, X-fastest with 3 channels last
* optional 3D ground-truth payload, u8, X-fastest
* u32 JSON length + UTF-8 JSON block: cameras plus per-view file names

Per-view images, 2D masks and feature maps live in sibling raw f32 files
(row-major, channel-last) referenced by name from the JSON block.
"""

from __future__ import annotations

import json
import shutil
import struct
from pathlib import Path

import numpy as np

from .cameras import Camera
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    TruncatedFileError,
    VersionMismatchError,
)
from .grids import ColorGrid, DensityGrid
from .scene import Scene, View

__all__ = ["save_scene", "load_scene", "SCENE_MAGIC", "SCENE_VERSION"]

SCENE_MAGIC = b"RFSEG1"
SCENE_VERSION = 1

FLAG_COLOR = 1
FLAG_GT3D = 2
FLAG_GT2D = 4


def _x_fastest(arr: np.ndarray) -> np.ndarray:
    """Reorder an (X, Y, D[, C]) array so X varies fastest on disk."""
    axes = (2, 1, 0) + tuple(range(3, arr.ndim))
    return np.ascontiguousarray(arr.transpose(axes))


def _from_x_fastest(buf: np.ndarray, dims, channels=None) -> np.ndarray:
    X, Y, D = dims
    shape = (D, Y, X) if channels is None else (D, Y, X, channels)
    arr = buf.reshape(shape)
    axes = (2, 1, 0) if channels is None else (2, 1, 0, 3)
    return np.ascontiguousarray(arr.transpose(axes))


def save_scene(scene: Scene, path) -> None:
    """Write the scene container plus sibling per-view raw files."""
    path = Path(path)
    stem = path.stem
    flags = 0
    if scene.color_grid is not None:
        flags |= FLAG_COLOR
    if scene.gt_mask3d is not None:
        flags |= FLAG_GT3D
    has_gt2d = any(v.gt_mask2d is not None for v in scene.views)
    if has_gt2d:
        flags |= FLAG_GT2D

    X, Y, D = scene.dims
    g = scene.density_grid
    header = SCENE_MAGIC + struct.pack(
        "<IIIIf3fI", SCENE_VERSION, X, Y, D,
        np.float32(g.voxel_size),
        *np.asarray(g.origin, dtype=np.float32),
        flags,
    )

    meta = {"cameras": [], "images": [], "gt2d": [], "features": []}
    with open(path, "wb") as f:
        f.write(header)
        f.write(_x_fastest(g.values.astype("<f4", copy=False)).tobytes())
        if scene.color_grid is not None:
            f.write(_x_fastest(scene.color_grid.values.astype("<f4", copy=False)).tobytes())
        if scene.gt_mask3d is not None:
            f.write(_x_fastest(scene.gt_mask3d.astype(np.uint8)).tobytes())

        for i, view in enumerate(scene.views):
            img_name = f"{stem}.view{i}.image.f32"
            np.ascontiguousarray(view.image, dtype="<f4").tofile(path.parent / img_name)
            meta["images"].append(img_name)
            meta["cameras"].append(view.camera.to_json())
            if view.gt_mask2d is not None:
                m_name = f"{stem}.view{i}.gt2d.f32"
                np.ascontiguousarray(view.gt_mask2d, dtype="<f4").tofile(path.parent / m_name)
                meta["gt2d"].append(m_name)
            else:
                meta["gt2d"].append(None)
            if view.feature_path is not None:
                src = Path(view.feature_path)
                if src.parent != path.parent:
                    shutil.copy(src, path.parent / src.name)
                    side = src.with_suffix(".json")
                    if side.exists():
                        shutil.copy(side, path.parent / side.name)
                meta["features"].append(src.name)
            else:
                meta["features"].append(None)

        blob = json.dumps(meta).encode("utf-8")
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise TruncatedFileError(
                f"{self.path}: needs {self.off + n} bytes, file has {len(self.data)}"
            )
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def array(self, dtype, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt)


def load_scene(path) -> Scene:
    path = Path(path)
    data = path.read_bytes()
    r = _Reader(data, path)

    if r.take(len(SCENE_MAGIC)) != SCENE_MAGIC:
        raise BadMagicError(f"{path}: not a scene container")
    version, X, Y, D = struct.unpack("<IIII", r.take(16))
    if version != SCENE_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {SCENE_VERSION}")
    if min(X, Y, D) < 2 or max(X, Y, D) > 4096:
        raise DimensionMismatchError(f"{path}: implausible dims {(X, Y, D)}")
    voxel_size, ox, oy, oz = struct.unpack("<4f", r.take(16))
    (flags,) = struct.unpack("<I", r.take(4))

    n = X * Y * D
    density = _from_x_fastest(r.array("<f4", n), (X, Y, D))
    color = None
    if flags & FLAG_COLOR:
        color = _from_x_fastest(r.array("<f4", n * 3), (X, Y, D), channels=3)
    gt3d = None
    if flags & FLAG_GT3D:
        gt3d = _from_x_fastest(r.array("u1", n), (X, Y, D)).astype(bool)

    (blob_len,) = struct.unpack("<I", r.take(4))
    meta = json.loads(r.take(blob_len).decode("utf-8"))

    origin = np.array([ox, oy, oz], dtype=np.float64)
    density_grid = DensityGrid(density, voxel_size=float(voxel_size), origin=origin)
    color_grid = None
    if color is not None:
        color_grid = ColorGrid(color, voxel_size=float(voxel_size), origin=origin)

    views = []
    cams = meta.get("cameras", [])
    images = meta.get("images", [])
    gt2d = meta.get("gt2d", [None] * len(cams))
    feats = meta.get("features", [None] * len(cams))
    if not (len(cams) == len(images) == len(gt2d) == len(feats)):
        raise DimensionMismatchError(f"{path}: inconsistent per-view metadata lengths")
    for cam_json, img_name, m_name, f_name in zip(cams, images, gt2d, feats):
        cam = Camera.from_json(cam_json)
        img_path = path.parent / img_name
        if not img_path.exists():
            raise TruncatedFileError(f"{path}: missing sibling file {img_name}")
        img = np.fromfile(img_path, dtype="<f4")
        if img.size != cam.height * cam.width * 3:
            raise DimensionMismatchError(f"{img_name}: payload does not match camera size")
        img = img.reshape(cam.height, cam.width, 3)
        mask = None
        if m_name is not None:
            marr = np.fromfile(path.parent / m_name, dtype="<f4")
            if marr.size != cam.height * cam.width:
                raise DimensionMismatchError(f"{m_name}: payload does not match camera size")
            mask = marr.reshape(cam.height, cam.width)
        fpath = str(path.parent / f_name) if f_name is not None else None
        views.append(View(camera=cam, image=img, gt_mask2d=mask, feature_path=fpath))

    return Scene(density_grid=density_grid, color_grid=color_grid, views=views, gt_mask3d=gt3d)
