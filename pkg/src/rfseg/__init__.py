"""Interactive click-driven 3D segmentation of voxel radiance fields."""

from .cameras import Camera
from .errors import RFSegError, ValidationError
from .estimator import ClickSegmenter
from .grids import ColorGrid, DensityGrid, OpacityGrid, densities_to_opacity, sample_trilinear
from .guidance import ClickEvent, GuidanceConfig, GuidanceField
from .model import NetConfig, SegmentationModel
from .scene import Scene, View
from .sceneio import load_scene, save_scene
from .synth import Primitive, SyntheticSpec, make_synthetic_scene, random_spec
from .train import EvalReport, LossConfig, TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Camera", "Scene", "View",
    "DensityGrid", "OpacityGrid", "ColorGrid",
    "densities_to_opacity", "sample_trilinear",
    "ClickEvent", "GuidanceConfig", "GuidanceField",
    "NetConfig", "SegmentationModel",
    "Primitive", "SyntheticSpec", "make_synthetic_scene", "random_spec",
    "TrainConfig", "LossConfig", "EvalReport", "train", "evaluate",
    "ClickSegmenter",
    "load_scene", "save_scene",
    "RFSegError", "ValidationError",
]
