"""Parent/child index maps between a grid and its 2x-per-axis refinement.

Low-res voxel (x, y, z) owns the eight high-res voxels (2x+a, 2y+b, 2z+c)
for a, b, c in {0, 1}; the children of all parents partition the high-res
grid. Flat indices are C-order over (X, Y, D).
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

__all__ = [
    "octree_children",
    "octree_parent",
    "children_flat",
    "parent_flat",
    "CHILD_OFFSETS",
]

CHILD_OFFSETS = np.array(
    [[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)], dtype=np.int64
)


def octree_children(parent: tuple[int, int, int],
                    low_dims: tuple[int, int, int]) -> np.ndarray:
    """Eight high-res child coordinates of one low-res voxel, shape (8, 3)."""
    p = np.asarray(parent, dtype=np.int64)
    dims = np.asarray(low_dims, dtype=np.int64)
    if np.any(p < 0) or np.any(p >= dims):
        raise ValidationError(f"voxel {tuple(parent)} outside grid {tuple(low_dims)}")
    return 2 * p + CHILD_OFFSETS


def octree_parent(child: tuple[int, int, int],
                  high_dims: tuple[int, int, int]) -> tuple[int, int, int]:
    """Low-res parent coordinate of a high-res voxel."""
    c = np.asarray(child, dtype=np.int64)
    dims = np.asarray(high_dims, dtype=np.int64)
    if np.any(c < 0) or np.any(c >= dims):
        raise ValidationError(f"voxel {tuple(child)} outside grid {tuple(high_dims)}")
    return tuple((c // 2).tolist())


def children_flat(parent_flat_idx: np.ndarray,
                  low_dims: tuple[int, int, int]) -> np.ndarray:
    """Flat high-res child indices for flat low-res parents, shape (P, 8).

    Children appear in the fixed CHILD_OFFSETS order, parent-major.
    """
    X, Y, D = low_dims
    idx = np.asarray(parent_flat_idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= X * Y * D):
        raise ValidationError("parent index out of range")
    px = idx // (Y * D)
    py = (idx // D) % Y
    pz = idx % D
    cx = 2 * px[:, None] + CHILD_OFFSETS[:, 0]
    cy = 2 * py[:, None] + CHILD_OFFSETS[:, 1]
    cz = 2 * pz[:, None] + CHILD_OFFSETS[:, 2]
    return (cx * (2 * Y) + cy) * (2 * D) + cz


def parent_flat(child_flat_idx: np.ndarray,
                low_dims: tuple[int, int, int]) -> np.ndarray:
    """Flat low-res parent indices for flat high-res children."""
    X, Y, D = low_dims
    idx = np.asarray(child_flat_idx, dtype=np.int64)
    cx = idx // ((2 * Y) * (2 * D))
    cy = (idx // (2 * D)) % (2 * Y)
    cz = idx % (2 * D)
    return ((cx // 2) * Y + cy // 2) * D + cz // 2
