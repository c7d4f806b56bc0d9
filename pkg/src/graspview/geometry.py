"""Frame-tagged rigid transforms, pinhole projection and point clouds.

Camera convention (used everywhere): +z forward, +x right, +y down in the
image.  Pixel ``(u, v)`` addresses column ``u`` and row ``v``; pixel centres
sit on integer coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateGeometry, DimensionMismatch, FrameMismatch, InvalidRotation

ROT_TOL = 1e-9
REPAIR_TOL = 1e-6


@dataclass(frozen=True, order=True)
class Frame:
    """Static frame label.  ``view`` is only meaningful for cameras."""

    name: str
    view: Optional[str] = None

    def __post_init__(self):
        if self.name not in ("base", "camera", "world_pred", "end_effector", "object"):
            raise ValueError(f"unknown frame name {self.name!r}")
        if (self.name == "camera") != (self.view is not None):
            raise ValueError("only camera frames carry a view id")

    def __str__(self):
        return f"camera[{self.view}]" if self.view is not None else self.name

    @classmethod
    def parse(cls, text: str) -> "Frame":
        text = text.strip()
        if text.startswith("camera[") and text.endswith("]"):
            return cls("camera", text[7:-1])
        return cls(text)


BASE = Frame("base")
WORLD_PRED = Frame("world_pred")
END_EFFECTOR = Frame("end_effector")
OBJECT = Frame("object")   # local frame of a simulated solid


def camera(view) -> Frame:
    return Frame("camera", str(view))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def rotation_error(r: np.ndarray) -> float:
    """max(|RᵀR − I|_F, |det R − 1|)."""
    return max(float(np.linalg.norm(r.T @ r - np.eye(3))), abs(float(np.linalg.det(r)) - 1.0))


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Maps coordinates expressed in ``src`` into ``dst``: ``x_dst = R x_src + t``.

    Rotations within ``REPAIR_TOL`` of SO(3) are projected onto it; worse ones
    raise :class:`InvalidRotation`.
    """

    rotation: np.ndarray
    translation: np.ndarray
    src: Frame
    dst: Frame

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if r.shape != (3, 3) or t.shape != (3,):
            raise DimensionMismatch("rotation must be 3x3 and translation 3-vector")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise InvalidRotation("non-finite transform")
        err = rotation_error(r)
        if err > REPAIR_TOL:
            raise InvalidRotation(f"rotation off SO(3) by {err:.3g}")
        if err > ROT_TOL:
            r = nearest_rotation(r)
        object.__setattr__(self, "rotation", _frozen(r))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls, src: Frame, dst: Frame) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), src, dst)

    @classmethod
    def from_matrix(cls, m, src: Frame, dst: Frame) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3], src, dst)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        return invert(self)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)

    def apply(self, points) -> np.ndarray:
        """Transform an ``(N, 3)`` array (or a single 3-vector) without tag checks."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def retag(self, src: Frame = None, dst: Frame = None) -> "RigidTransform":
        return RigidTransform(self.rotation, self.translation,
                              self.src if src is None else src,
                              self.dst if dst is None else dst)

    def allclose(self, other: "RigidTransform", atol: float = 1e-9) -> bool:
        return (self.src == other.src and self.dst == other.dst
                and np.allclose(self.rotation, other.rotation, atol=atol, rtol=0)
                and np.allclose(self.translation, other.translation, atol=atol, rtol=0))

    def __repr__(self):
        return (f"RigidTransform({self.src} -> {self.dst}, "
                f"t={np.array2string(self.translation, precision=4)})")


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """``a ∘ b``: first ``b`` then ``a``."""
    if a.src != b.dst:
        raise FrameMismatch(f"cannot compose {a.src}->{a.dst} after {b.src}->{b.dst}")
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation,
                          b.src, a.dst)


def invert(t: RigidTransform) -> RigidTransform:
    rt = t.rotation.T
    return RigidTransform(rt, -rt @ t.translation, t.dst, t.src)


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)


def geodesic_angle(ra: np.ndarray, rb: np.ndarray) -> float:
    """Rotation angle (radians) of ``raᵀ rb``."""
    c = (np.trace(ra.T @ rb) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.05
    far: float = 1.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValueError("image size must be positive")
        if not (0 < self.near < self.far):
            raise ValueError("require 0 < near < far")

    @property
    def shape(self) -> tuple:
        return (int(self.height), int(self.width))

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    def check_mask(self, mask: np.ndarray) -> np.ndarray:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.shape:
            raise DimensionMismatch(f"mask {mask.shape} vs image {self.shape}")
        return mask


def project(k: CameraIntrinsics, p) -> Optional[tuple]:
    """Project a camera-frame point.  Returns ``(pixel, depth)`` or ``None``
    when the point lies closer than the near plane (including behind)."""
    x, y, z = (float(v) for v in p)
    if z < k.near:
        return None
    return np.array([k.fx * x / z + k.cx, k.fy * y / z + k.cy]), z


def project_points(k: CameraIntrinsics, pts: np.ndarray):
    """Vectorised :func:`project`.  Returns ``(uv, z, ok)``; ``uv`` is
    undefined where ``ok`` is false."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    ok = z >= k.near
    zs = np.where(ok, z, 1.0)
    uv = np.empty((len(pts), 2))
    uv[:, 0] = k.fx * pts[:, 0] / zs + k.cx
    uv[:, 1] = k.fy * pts[:, 1] / zs + k.cy
    return uv, z, ok


def pixel_index(uv: np.ndarray) -> np.ndarray:
    """Round real pixel coordinates to integer pixel indices (half-up)."""
    return np.floor(np.asarray(uv) + 0.5).astype(np.int64)


def backproject(k: CameraIntrinsics, pixel, depth: float) -> np.ndarray:
    u, v = pixel
    return np.array([(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth])


def backproject_depth(k: CameraIntrinsics, depth: np.ndarray) -> np.ndarray:
    """Per-pixel camera-frame points (H, W, 3); NaN where depth is not finite."""
    h, w = depth.shape
    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    z = np.where(np.isfinite(depth), depth, np.nan)
    return np.stack([(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z], axis=-1)


@dataclass(eq=False)
class PointCloud:
    points: np.ndarray
    frame: Frame
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        self.points = pts
        if self.colors is not None:
            c = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
            if len(c) != len(pts):
                raise DimensionMismatch("colors and points differ in length")
            self.colors = c

    def __len__(self):
        return len(self.points)

    @classmethod
    def empty(cls, frame: Frame) -> "PointCloud":
        return cls(np.zeros((0, 3)), frame)

    def subset(self, sel) -> "PointCloud":
        sel = np.asarray(sel)
        return PointCloud(self.points[sel], self.frame,
                          None if self.colors is None else self.colors[sel])

    def centroid(self) -> Optional[np.ndarray]:
        return None if len(self) == 0 else self.points.mean(axis=0)

    @staticmethod
    def concat(clouds: Sequence["PointCloud"]) -> "PointCloud":
        frames = {c.frame for c in clouds}
        if len(frames) != 1:
            raise FrameMismatch(f"cannot concatenate clouds in {sorted(map(str, frames))}")
        colored = all(c.colors is not None for c in clouds)
        return PointCloud(np.concatenate([c.points for c in clouds]), clouds[0].frame,
                          np.concatenate([c.colors for c in clouds]) if colored else None)


def transform_points(t: RigidTransform, c: PointCloud) -> PointCloud:
    if c.frame != t.src:
        raise FrameMismatch(f"cloud in {c.frame}, transform expects {t.src}")
    return PointCloud(t.apply(c.points), t.dst, c.colors)


def look_rotation(forward, down_hint=(0.0, 0.0, -1.0)) -> np.ndarray:
    """Camera-to-world rotation with +z along ``forward`` and +y as close to
    ``down_hint`` as possible."""
    f = np.asarray(forward, dtype=np.float64)
    f = f / np.linalg.norm(f)
    x = np.cross(np.asarray(down_hint, dtype=np.float64), f)
    n = np.linalg.norm(x)
    if n < 1e-9:
        raise DegenerateGeometry("forward axis is parallel to the down hint")
    x /= n
    return np.column_stack([x, np.cross(f, x), f])

