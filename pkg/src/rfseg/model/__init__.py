"""Coarse-to-fine volumetric segmentation network."""

from .config import NetConfig
from .octree import children_flat, octree_children, octree_parent, parent_flat
from .refine import RefineTransformer, select_uncertain
from .segmenter import SegForward, SegmentationModel, SegState, build_seg_input, compose_highres
from .unet import UNet3D

__all__ = [
    "NetConfig",
    "octree_children", "octree_parent", "children_flat", "parent_flat",
    "select_uncertain", "RefineTransformer", "UNet3D",
    "SegmentationModel", "SegState", "SegForward",
    "build_seg_input", "compose_highres",
]
