"""Off-screen point splatting with a Z-buffer."""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from . import _kernels
from .errors import FrameMismatch
from .geometry import CameraIntrinsics, PointCloud, RigidTransform, invert, pixel_index, project_points

SENTINEL_GRAY = (0.5, 0.5, 0.5)


@dataclass(frozen=True)
class RenderSettings:
    splat_radius: int = 1
    background: tuple = (0.0, 0.0, 0.0)
    near: Optional[float] = None
    far: Optional[float] = None

    def __post_init__(self):
        if int(self.splat_radius) < 0:
            raise ValueError("splat_radius must be >= 0")
        if self.near is not None and self.far is not None and not self.near < self.far:
            raise ValueError("near must be < far")

    def planes(self, k: CameraIntrinsics) -> tuple:
        return (k.near if self.near is None else self.near,
                k.far if self.far is None else self.far)


@dataclass(eq=False)
class RenderedView:
    color: np.ndarray          # (H, W, 3) in [0, 1]
    depth: np.ndarray          # (H, W), inf where empty
    index: np.ndarray          # (H, W) winning point index, -1 where empty
    pose: RigidTransform       # camera -> base of the rendering camera
    target_hits: Optional[np.ndarray] = None   # (H, W) winner is a target point

    @property
    def coverage(self) -> float:
        return float(np.isfinite(self.depth).mean())

    @property
    def shape(self) -> tuple:
        return self.depth.shape


def _camera_points(cloud: PointCloud, t_bc: RigidTransform) -> np.ndarray:
    if cloud.frame != t_bc.dst:
        raise FrameMismatch(f"cloud in {cloud.frame}, camera pose targets {t_bc.dst}")
    return invert(t_bc).apply(cloud.points)


def colorize_cloud(cloud: PointCloud, image: np.ndarray, k: CameraIntrinsics,
                   t_bc: RigidTransform) -> PointCloud:
    """Colour every point from the nearest pixel of ``image``; points outside
    the image or in front of the near plane get a neutral gray."""
    pc = _camera_points(cloud, t_bc)
    uv, _, ok = project_points(k, pc)
    ij = pixel_index(uv)
    h, w = k.shape
    ok &= (ij[:, 0] >= 0) & (ij[:, 0] < w) & (ij[:, 1] >= 0) & (ij[:, 1] < h)
    colors = np.tile(np.asarray(SENTINEL_GRAY, dtype=np.float64), (len(cloud), 1))
    img = np.asarray(image, dtype=np.float64)
    colors[ok] = img[ij[ok, 1], ij[ok, 0]]
    return PointCloud(cloud.points, cloud.frame, colors)


def splat_render(cloud: PointCloud, k: CameraIntrinsics, t_bc: RigidTransform,
                 settings: RenderSettings = RenderSettings(),
                 target: Optional[np.ndarray] = None) -> RenderedView:
    """Render ``cloud`` from the camera at ``t_bc``.

    Each point covers a ``(2r+1)²`` square around its rounded pixel; the
    nearest point wins.  ``target`` optionally flags points belonging to the
    object of interest, producing :attr:`RenderedView.target_hits`.
    """
    h, w = k.shape
    near, far = settings.planes(k)
    pc = _camera_points(cloud, t_bc)
    uv, z, ok = project_points(k, pc)
    ok &= (z >= near) & (z <= far)
    keep = np.flatnonzero(ok)
    ij = pixel_index(uv[keep])
    r = int(settings.splat_radius)
    # drop points whose whole footprint misses the image
    inside = ((ij[:, 0] >= -r) & (ij[:, 0] < w + r) & (ij[:, 1] >= -r) & (ij[:, 1] < h + r))
    keep, ij = keep[inside], ij[inside]
    local, depth = _kernels.splat(ij[:, 0], ij[:, 1], z[keep], h, w, r)

    if len(keep):
        index = np.where(local >= 0, keep[np.maximum(local, 0)], -1)
    else:
        index = np.full((h, w), -1, dtype=np.int64)
    hit = index >= 0
    color = np.empty((h, w, 3))
    color[:] = np.asarray(settings.background, dtype=np.float64)
    if cloud.colors is not None:
        color[hit] = cloud.colors[index[hit]]
    else:
        color[hit] = 1.0
    hits = None
    if target is not None:
        target = np.asarray(target, dtype=bool)
        hits = np.zeros((h, w), dtype=bool)
        hits[hit] = target[index[hit]]
    return RenderedView(color, depth, index, t_bc, hits)


def color_png_bytes(view: RenderedView) -> bytes:
    buf = io.BytesIO()
    rgb = np.clip(np.rint(view.color * 255), 0, 255).astype(np.uint8)
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_color_png(view: RenderedView, path) -> None:
    Path(path).write_bytes(color_png_bytes(view))


def save_depth_png(view: RenderedView, path) -> None:
    """16-bit depth in millimetres; 0 marks empty pixels."""
    mm = np.where(np.isfinite(view.depth), np.rint(view.depth * 1000.0), 0)
    mm = np.clip(mm, 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(str(path), format="PNG")
