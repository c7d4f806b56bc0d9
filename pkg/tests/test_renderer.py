import io

import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from graspview.errors import FrameMismatch
from graspview.geometry import BASE, PointCloud, RigidTransform, camera, compose, invert
from graspview.renderer import (SENTINEL_GRAY, RenderSettings, color_png_bytes, colorize_cloud,
                                save_depth_png, splat_render)
from oracles import random_rotation, zbuffer

CAM = camera("c")


def ident():
    return RigidTransform.identity(CAM, BASE)


def test_zbuffer_two_points(k_small):
    cloud = PointCloud([[0, 0, 1.0], [0, 0, 2.0]], BASE, [[1, 0, 0], [0, 1, 0]])
    v = splat_render(cloud, k_small, ident(), RenderSettings(splat_radius=0))
    assert v.depth[15, 20] == 1.0 and np.allclose(v.color[15, 20], [1, 0, 0])
    assert v.index[15, 20] == 0


def test_behind_camera_empty(k_small):
    cloud = PointCloud([[0, 0, -1.0], [0.1, 0, -2.0]], BASE)
    v = splat_render(cloud, k_small, ident())
    assert v.coverage == 0.0 and np.all(v.index == -1)


def test_planar_grid_coverage(k_small):
    xs = np.linspace(-0.1, 0.1, 10)
    g = np.array([[x, y, 1.0] for x in xs for y in xs])
    v = splat_render(PointCloud(g, BASE), k_small, ident(), RenderSettings(splat_radius=1))
    depth, _ = zbuffer(g, 60, 60, 20, 15, 40, 30, 1, 0.05, 5.0)
    assert v.coverage == np.isfinite(depth).sum() / (40 * 30)


def _oracle_case(rng, n, k):
    pts = np.column_stack([rng.uniform(-1.5, 1.5, n), rng.uniform(-1.2, 1.2, n), rng.uniform(-1, 6, n)])
    r = int(rng.integers(0, 3))
    if rng.random() < 0.3:
        pts[: n // 4, 2] = pts[n // 4: 2 * (n // 4), 2]   # force exact depth ties
    return pts, r


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 1000))
def test_depth_equals_bruteforce(seed, n):
    from graspview.geometry import CameraIntrinsics
    k = CameraIntrinsics(60.0, 55.0, 20.0, 15.0, 40, 30, near=0.5, far=4.0)
    rng = np.random.default_rng(seed)
    pts, r = _oracle_case(rng, n, k)
    v = splat_render(PointCloud(pts, BASE), k, ident(), RenderSettings(splat_radius=r))
    depth, index = zbuffer(pts, 60, 55, 20, 15, 40, 30, r, 0.5, 4.0)
    assert np.array_equal(v.depth, depth)
    assert np.array_equal(v.index, index)
    fin = v.depth[np.isfinite(v.depth)]
    assert np.all((fin >= 0.5) & (fin <= 4.0))


def test_settings_override_planes(k_small):
    cloud = PointCloud([[0, 0, 0.5], [0.2, 0, 2.0]], BASE)
    v = splat_render(cloud, k_small, ident(), RenderSettings(near=1.0, far=3.0))
    assert np.nanmin(np.where(np.isfinite(v.depth), v.depth, np.nan)) == 2.0
    with pytest.raises(ValueError):
        RenderSettings(near=2.0, far=1.0)


def test_depth_finite_iff_not_background(rng, k_small):
    pts = rng.uniform(-0.5, 0.5, (300, 3)) + [0, 0, 1.5]
    cols = rng.uniform(0.1, 1.0, (300, 3))
    v = splat_render(PointCloud(pts, BASE, cols), k_small, ident())
    bg = np.all(v.color == 0.0, axis=-1)
    assert np.array_equal(np.isfinite(v.depth), ~bg)


def test_pose_identity_composition_bit_identical(rng, k_small):
    t = RigidTransform(random_rotation(rng), rng.normal(size=3), CAM, BASE)
    pts = t.apply(rng.uniform(-0.3, 0.3, (500, 3)) + [0, 0, 1.2])
    cloud = PointCloud(pts, BASE)
    a = splat_render(cloud, k_small, t)
    b = splat_render(cloud, k_small, compose(t, RigidTransform.identity(CAM, CAM)))
    assert np.array_equal(a.depth, b.depth) and np.array_equal(a.index, b.index)


def test_frame_checked(k_small):
    with pytest.raises(FrameMismatch):
        splat_render(PointCloud([[0, 0, 1.0]], camera("x")), k_small, ident())


def test_colorize_examples(k_small):
    red = np.zeros((30, 40, 3))
    red[..., 0] = 1
    c = colorize_cloud(PointCloud([[0, 0, 1.0]], BASE), red, k_small, ident())
    assert np.allclose(c.colors, [[1, 0, 0]])
    c = colorize_cloud(PointCloud([[0, 0, -1.0]], BASE), red, k_small, ident())
    assert np.allclose(c.colors, [SENTINEL_GRAY])
    # straddling the border: u = 60*x + 20 -> 0, 39 in bounds, 45 out
    pts = [[-20 / 60, 0, 1.0], [19 / 60, 0, 1.0], [25 / 60, 0, 1.0]]
    img = np.zeros((30, 40, 3))
    img[15, 0] = [0, 1, 0]
    img[15, 39] = [0, 0, 1]
    c = colorize_cloud(PointCloud(pts, BASE), img, k_small, ident())
    assert np.allclose(c.colors, [[0, 1, 0], [0, 0, 1], SENTINEL_GRAY])


def test_png_exports(tmp_path, k_small, rng):
    pts = rng.uniform(-0.3, 0.3, (200, 3)) + [0, 0, 1.0]
    v = splat_render(PointCloud(pts, BASE), k_small, ident())
    im = Image.open(io.BytesIO(color_png_bytes(v)))
    assert im.size == (40, 30) and im.mode == "RGB"
    save_depth_png(v, tmp_path / "d.png")
    d = np.asarray(Image.open(tmp_path / "d.png"))
    assert d.dtype == np.uint16
    fin = np.isfinite(v.depth)
    assert np.array_equal(d[fin], np.rint(v.depth[fin] * 1000).astype(np.uint16))
    assert np.all(d[~fin] == 0)
