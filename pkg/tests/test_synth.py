import numpy as np
import pytest

from rfseg.errors import ValidationError
from rfseg.synth import Primitive, SyntheticSpec, make_synthetic_scene, random_spec

from reference import ball_voxel_count


def sphere_spec(radius=4.0, dims=(16, 16, 16), **kw):
    c = tuple(d / 2.0 for d in dims)
    return SyntheticSpec(
        dims=dims,
        primitives=[Primitive("sphere", c, radius, 4.0, (1, 0, 0), True)],
        n_views=2, image_size=24, **kw,
    )


def test_gt_mask_matches_brute_force_ball(tiny_scene=None):
    spec = sphere_spec()
    scene = make_synthetic_scene(spec)
    expect = ball_voxel_count((16, 16, 16), (8.0, 8.0, 8.0), 4.0)
    assert int(scene.gt_mask3d.sum()) == expect


def test_density_set_exactly_on_foreground(tiny_scene=None):
    spec = sphere_spec()
    scene = make_synthetic_scene(spec)
    assert np.array_equal(scene.gt_mask3d, scene.density_grid.values > 0)


def test_deterministic_across_seeds_without_noise():
    a = make_synthetic_scene(sphere_spec(seed=1))
    b = make_synthetic_scene(sphere_spec(seed=2))
    assert np.array_equal(a.density_grid.values, b.density_grid.values)
    assert np.array_equal(a.views[0].image, b.views[0].image)


def test_seed_matters_with_noise():
    a = make_synthetic_scene(sphere_spec(seed=1, density_noise=0.5))
    b = make_synthetic_scene(sphere_spec(seed=2, density_noise=0.5))
    assert not np.array_equal(a.density_grid.values, b.density_grid.values)
    c = make_synthetic_scene(sphere_spec(seed=1, density_noise=0.5))
    assert np.array_equal(a.density_grid.values, c.density_grid.values)


def test_requires_foreground_primitive():
    with pytest.raises(ValidationError):
        SyntheticSpec(dims=(16, 16, 16),
                      primitives=[Primitive("sphere", (8, 8, 8), 3.0)])


def test_rejects_primitive_outside_grid():
    with pytest.raises(ValidationError):
        SyntheticSpec(dims=(16, 16, 16),
                      primitives=[Primitive("sphere", (15, 8, 8), 4.0, foreground=True)])


def test_last_primitive_wins():
    spec = SyntheticSpec(
        dims=(16, 16, 16),
        primitives=[
            Primitive("box", (8, 8, 8), 3.0, 2.0, (1, 0, 0), True),
            Primitive("box", (8, 8, 8), 2.0, 5.0, (0, 1, 0), False),
        ],
        n_views=1, image_size=16,
    )
    scene = make_synthetic_scene(spec)
    # inner box overwrote the core: density 5, not foreground
    assert scene.density_grid.values[8, 8, 8] == 5.0
    assert not scene.gt_mask3d[8, 8, 8]
    # shell voxels still foreground with density 2
    assert scene.density_grid.values[8, 8, 10] == 2.0
    assert scene.gt_mask3d[8, 8, 10]


def test_views_and_masks_present(tiny_scene):
    assert tiny_scene.n_views == 4
    for view in tiny_scene.views:
        assert view.image.shape == (32, 32, 3)
        assert view.gt_mask2d is not None
        assert view.gt_mask2d.sum() > 0  # object visible everywhere
        assert set(np.unique(view.gt_mask2d)).issubset({0.0, 1.0})


def test_spec_json_round_trip(tmp_path):
    spec = sphere_spec(seed=9)
    path = tmp_path / "spec.json"
    spec.save(path)
    loaded = SyntheticSpec.load(path)
    assert loaded == spec


def test_random_spec_generates_valid_scenes():
    rng = np.random.default_rng(0)
    for _ in range(4):
        spec = random_spec(rng, dims=(24, 24, 24), n_views=3, image_size=24)
        scene = make_synthetic_scene(spec)
        assert scene.gt_mask3d.sum() > 0
        assert all(v.gt_mask2d.sum() > 0 for v in scene.views)


def test_random_spec_deterministic():
    a = random_spec(np.random.default_rng(42))
    b = random_spec(np.random.default_rng(42))
    assert a == b
