import numpy as np
import pytest

from stitchkit import (
    BucketUnreachable,
    Camera,
    InvalidSpec,
    PoseSampling,
    SceneSpec,
    TextureSpec,
    generate_pair,
    make_scene,
    render,
    sample_camera_pair,
)
from stitchkit.dataset import generate_dataset
from stitchkit.losses import assign_bucket
from stitchkit.scene import AMBIENT, LIGHT_DIR, camera_rays, overlap_ratio, texture_rgb, value_noise

STILL = PoseSampling(baseline=(0.0, 0.0), max_yaw_deg=0.0)


@pytest.mark.parametrize("kwargs", [
    dict(layout="spiral"),
    dict(near=3.0, far=2.0),
    dict(near=0.0),
    dict(far=np.inf),
    dict(parallax=1.5),
    dict(texture=TextureSpec(kind="plaid")),
    dict(texture=TextureSpec(frequency=0.0)),
])
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpec):
        SceneSpec(**kwargs)


def test_spec_dict_roundtrip():
    spec = SceneSpec("heightfield", 1.5, 5.0, TextureSpec("voronoi", 3.0, 9), 0.7)
    assert SceneSpec.from_dict(spec.to_dict()) == spec


def test_single_plane_depth_matches_plane_equation():
    spec = SceneSpec(layout="single_plane", near=2.0, far=4.0, parallax=0.5)
    cam = Camera.from_fov(40, 30)
    _, depth = render(make_scene(spec, 3), cam)
    # plane through (0, 0, near) tilted 10 degrees about y: z = near + tan(10 deg) * x
    v, u = np.mgrid[0:30, 0:40].astype(float)
    a = (u - cam.K[0, 2]) / cam.K[0, 0]
    expected = 2.0 / (1 - np.tan(np.deg2rad(10.0)) * a)
    assert np.allclose(depth, expected, rtol=1e-12)


def test_two_plane_depths_exact():
    spec = SceneSpec(layout="two_plane", near=2.0, far=4.0, parallax=1.0)
    cam = Camera.from_fov(32, 24)
    _, depth = render(make_scene(spec, 0), cam)
    rows_below = np.arange(24) > cam.K[1, 2]
    assert np.all(depth[rows_below] == 2.0)
    assert np.all(depth[~rows_below] == 4.0)


def test_parallax_zero_collapses_two_plane():
    spec = SceneSpec(layout="two_plane", parallax=0.0)
    _, depth = render(make_scene(spec, 0), Camera.from_fov(16, 12))
    assert np.all(depth == spec.far)


def test_scene_and_render_deterministic():
    for layout in ("two_plane", "heightfield", "box_room"):
        spec = SceneSpec(layout=layout)
        a, b = make_scene(spec, 42), make_scene(spec, 42)
        assert a == b
        cam = Camera.from_fov(24, 16)
        ia, da = render(a, cam)
        ib, db = render(b, cam)
        assert ia.tobytes() == ib.tobytes() and da.tobytes() == db.tobytes()


def test_checker_render_matches_closed_form():
    tex = TextureSpec("checker", frequency=4.0, seed=2)
    spec = SceneSpec(layout="single_plane", parallax=0.0, texture=tex)
    scene = make_scene(spec, 1)
    cam = Camera.from_fov(48, 36)
    image, depth = render(scene, cam)
    v, u = np.mgrid[0:36, 0:48].astype(float)
    x = (u - cam.K[0, 2]) / cam.K[0, 0] * spec.near
    y = (v - cam.K[1, 2]) / cam.K[1, 1] * spec.near
    parity = (np.floor(x * 4) + np.floor(y * 4)).astype(int) % 2
    seed = scene._tex_seed(scene.rects[0])
    palette = texture_rgb(tex, np.array([0.1, 1.1]) / 4, np.array([0.1, 0.1]) / 4, seed)
    # fronto-parallel surface facing the camera: normal (0, 0, -1)
    shade = AMBIENT + (1 - AMBIENT) * max(0.0, -LIGHT_DIR[2])
    expected = palette[parity] * shade
    assert np.all(depth == spec.near)
    assert np.abs(image - expected).max() < 1e-6
    assert set(np.unique(parity)) == {0, 1}


def test_camera_facing_away_sees_sky():
    R = np.diag([-1.0, 1.0, -1.0])
    cam = Camera.from_fov(16, 12, R=R)
    image, depth = render(make_scene(SceneSpec(layout="two_plane"), 0), cam)
    assert np.all(image == 0) and np.all(np.isinf(depth))


def test_heightfield_depth_lies_on_surface():
    spec = SceneSpec(layout="heightfield")
    scene = make_scene(spec, 7)
    cam = Camera.from_fov(32, 24)
    _, depth = render(scene, cam)
    assert np.isfinite(depth).all()
    pts = cam.center + camera_rays(cam) * depth[..., None]
    assert np.abs(pts[..., 2] - scene.heightfield.z(pts[..., 0], pts[..., 1])).max() < 1e-6
    assert depth.min() >= spec.near - 1e-9 and depth.max() <= spec.far + 1e-9


def test_box_room_is_closed():
    _, depth = render(make_scene(SceneSpec(layout="box_room"), 4), Camera.from_fov(32, 24))
    assert np.isfinite(depth).all()


def test_textures_in_range():
    s = np.linspace(-3, 3, 101)
    for kind in ("checker", "value_noise", "voronoi"):
        rgb = texture_rgb(TextureSpec(kind), s, s[::-1], 5)
        assert rgb.min() >= 0.15 and rgb.max() <= 0.85
    n = value_noise(s[:, None], s[None, :], 3)
    assert n.min() >= 0 and n.max() <= 1


def test_identical_cameras_for_full_overlap_bucket():
    cam_r, cam_t = sample_camera_pair(SceneSpec(layout="single_plane"), (0.99, 1.0), 3, size=(32, 32), sampling=STILL)
    assert cam_r == cam_t


def test_bucket_ratio_confirmed_at_full_resolution():
    spec = SceneSpec(layout="two_plane")
    size = (96, 96)
    cam_r, cam_t = sample_camera_pair(spec, (0.2, 0.4), 8, size=size)
    ratio = overlap_ratio(make_scene(spec, 8), cam_r, cam_t)
    assert 0.15 <= ratio <= 0.45


def test_unreachable_bucket():
    tiny = PoseSampling(baseline=(0.0, 0.001), max_yaw_deg=0.1)
    with pytest.raises(BucketUnreachable):
        sample_camera_pair(SceneSpec(layout="single_plane"), (0.0, 0.001), 0, size=(32, 32), sampling=tiny)
    with pytest.raises(ValueError):
        sample_camera_pair(SceneSpec(), (0.6, 0.4), 0)


def test_identity_sample_layers(identity_sample):
    s = identity_sample
    assert np.all(s.warp_gt == 0) and s.overlap.all() and s.overlap_ratio == 1.0
    h, w = s.shape
    ay, ax = h // 2, w // 2
    assert np.array_equal(s.sample_stitched[ay:ay + h, ax:ax + w], s.image_ref)
    assert s.sample_stitched.shape == (2 * h, 2 * w, 3)


def test_overlap_ratio_is_mask_mean(two_plane_sample, plane_sample):
    for s in (two_plane_sample, plane_sample):
        assert s.overlap_ratio == float(s.overlap.mean())
        assert 0.4 <= s.overlap_ratio < 0.6
        assert s.depth_ref.dtype == np.float32 and s.warp_gt.dtype == np.float32


def test_generate_pair_deterministic():
    a = generate_pair(SceneSpec(layout="box_room"), (0.6, 0.8), 21, size=(48, 40))
    b = generate_pair(SceneSpec(layout="box_room"), (0.6, 0.8), 21, size=(48, 40))
    for field in ("image_ref", "image_target", "depth_ref", "depth_target", "warp_gt", "overlap", "sample_stitched"):
        assert getattr(a, field).tobytes() == getattr(b, field).tobytes()
    assert a.cam_target == b.cam_target


def test_bucket_counts_audit(tmp_path):
    """100 requested samples over three buckets land in the requested buckets."""
    buckets = [(0.2, 0.4), (0.4, 0.6), (0.6, 0.8)]
    manifest = generate_dataset(tmp_path, 100, buckets, [SceneSpec("two_plane"), SceneSpec("single_plane")],
                                size=(32, 32), seed=3)
    assert not manifest["skipped"]
    realized = [assign_bucket(s["overlap_ratio"], buckets) for s in manifest["samples"]]
    requested = [buckets.index(tuple(s["bucket"])) for s in manifest["samples"]]
    assert realized == requested
    assert np.bincount(realized).tolist() == [34, 33, 33]
