import logging

import numpy as np
import pytest

from rfseg.autodiff import set_debug_finite
from rfseg.synth import Primitive, SyntheticSpec, make_synthetic_scene

set_debug_finite(True)
logging.getLogger("rfseg.model.refine").setLevel(logging.ERROR)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_scene_spec(dims=16, radius_frac=0.22, views=4, image_size=32):
    c = dims / 2.0
    return SyntheticSpec(
        dims=(dims, dims, dims),
        primitives=[Primitive("sphere", (c, c, c), radius_frac * dims, 4.0,
                              (0.9, 0.2, 0.2), True)],
        background=[Primitive("box", (c, c, 1.8), (c - 1.5, c - 1.5, 1.0), 3.0,
                              (0.2, 0.5, 0.8))],
        n_views=views,
        image_size=image_size,
    )


@pytest.fixture(scope="session")
def tiny_scene():
    """16^3 scene with 4 small views; cheap enough for most tests."""
    return make_synthetic_scene(small_scene_spec())


@pytest.fixture(scope="session")
def desk_scene():
    """32^3 scene with 8 views at 64x64 (the interactive desk setup)."""
    spec = SyntheticSpec(
        dims=(32, 32, 32),
        primitives=[Primitive("sphere", (15.0, 17.0, 16.0), 5.5, 4.5,
                              (0.9, 0.25, 0.2), True)],
        background=[
            Primitive("box", (16.0, 16.0, 3.0), (14.0, 14.0, 2.0), 3.0, (0.2, 0.5, 0.8)),
            Primitive("sphere", (25.0, 7.0, 9.0), 2.5, 3.5, (0.3, 0.8, 0.3)),
        ],
        n_views=8,
        image_size=64,
    )
    return make_synthetic_scene(spec)
