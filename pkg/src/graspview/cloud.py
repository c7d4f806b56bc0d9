"""Target-object extraction: mask selection, fusion, clipping, denoising,
clustering.  Every stage returns a subset of its input."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from sklearn.cluster import DBSCAN

from .errors import AllNoise, FrameMismatch
from .geometry import BASE, CameraIntrinsics, PointCloud, RigidTransform, pixel_index, project_points

BOUNDARY_BAND_PX = 2


@dataclass(frozen=True)
class WorkspaceBounds:
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("workspace radius must be positive")


@dataclass(frozen=True)
class FilterParams:
    stat_k: int = 20
    stat_sigma: float = 2.0
    radius_r: float = 0.01
    radius_min_n: int = 5
    dbscan_eps: float = 0.02
    dbscan_min_pts: int = 10

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def mask_lookup(points_b: np.ndarray, mask: np.ndarray, k: CameraIntrinsics,
                t_cb: RigidTransform) -> Tuple[np.ndarray, np.ndarray]:
    """Per point: is it in front of the camera and inside the image, and the
    mask value at its rounded pixel.  Returns ``(in_view, ij)``."""
    uv, _, ok = project_points(k, t_cb.apply(points_b))
    ij = pixel_index(uv)
    h, w = mask.shape
    ok &= (ij[:, 0] >= 0) & (ij[:, 0] < w) & (ij[:, 1] >= 0) & (ij[:, 1] < h)
    return ok, ij


def _in_mask(cloud, mask, k, t_cb):
    mask = k.check_mask(mask)
    if cloud.frame != t_cb.src:
        raise FrameMismatch(f"cloud in {cloud.frame}, camera transform expects {t_cb.src}")
    ok, ij = mask_lookup(cloud.points, mask, k, t_cb)
    sel = np.zeros(len(cloud), dtype=bool)
    sel[ok] = mask[ij[ok, 1], ij[ok, 0]]
    return sel, ok, ij


def mask_filter(cloud: PointCloud, mask: np.ndarray, k: CameraIntrinsics,
                t_cb: RigidTransform) -> Tuple[PointCloud, Optional[np.ndarray]]:
    """Keep points projecting into the mask; centroid is ``None`` when empty."""
    sel, _, _ = _in_mask(cloud, mask, k, t_cb)
    obj = cloud.subset(sel)
    return obj, obj.centroid()


def boundary_band(mask: np.ndarray, width: int = BOUNDARY_BAND_PX) -> np.ndarray:
    """Pixels within ``width`` (Chebyshev) of a mask edge, on either side."""
    mask = np.asarray(mask, dtype=bool)
    st = np.ones((2 * width + 1, 2 * width + 1), dtype=bool)
    return ndimage.binary_dilation(mask, st) & ~ndimage.binary_erosion(mask, st, border_value=1)


def fuse_masks_select(cloud: PointCloud, mask_bv: np.ndarray, masks_other: Sequence[np.ndarray],
                      k: CameraIntrinsics, t_cb_bv: RigidTransform,
                      t_cb_other: Sequence[RigidTransform], return_index: bool = False):
    """OR-fuse the BV mask with other views' masks.

    Inside the BV mask's boundary band only the BV verdict counts.  A single
    extra mask/transform may be passed bare instead of in a list.
    """
    if isinstance(masks_other, np.ndarray) and masks_other.ndim == 2:
        masks_other, t_cb_other = [masks_other], [t_cb_other]
    bv_in, bv_ok, bv_ij = _in_mask(cloud, mask_bv, k, t_cb_bv)
    band = np.zeros(len(cloud), dtype=bool)
    bmask = boundary_band(np.asarray(mask_bv, dtype=bool))
    band[bv_ok] = bmask[bv_ij[bv_ok, 1], bv_ij[bv_ok, 0]]
    other = np.zeros(len(cloud), dtype=bool)
    for m, t in zip(masks_other, t_cb_other):
        other |= _in_mask(cloud, m, k, t)[0]
    keep = bv_in | (other & ~band)
    idx = np.flatnonzero(keep)
    return (cloud.subset(idx), idx) if return_index else cloud.subset(idx)


def clip_workspace(cloud: PointCloud, b: WorkspaceBounds = WorkspaceBounds(),
                   return_index: bool = False):
    if cloud.frame != BASE:
        raise FrameMismatch("workspace clipping expects a base-frame cloud")
    d = np.linalg.norm(cloud.points - np.asarray(b.center, dtype=np.float64), axis=1)
    idx = np.flatnonzero(d <= b.radius)
    return (cloud.subset(idx), idx) if return_index else cloud.subset(idx)


def statistical_inliers(points: np.ndarray, k: int, sigma: float) -> np.ndarray:
    n = len(points)
    if n < 2:
        return np.ones(n, dtype=bool)
    kk = min(k, n - 1)
    dist, _ = cKDTree(points).query(points, k=kk + 1)
    mean_d = dist[:, 1:].mean(axis=1)
    return mean_d <= mean_d.mean() + sigma * mean_d.std()


def radius_inliers(points: np.ndarray, r: float, min_n: int) -> np.ndarray:
    if len(points) == 0:
        return np.ones(0, dtype=bool)
    counts = cKDTree(points).query_ball_point(points, r, return_length=True) - 1
    return counts >= min_n


def denoise(cloud: PointCloud, p: FilterParams = FilterParams(), return_index: bool = False):
    """Statistical removal followed by radius removal."""
    idx = np.arange(len(cloud))
    if len(cloud):
        idx = idx[statistical_inliers(cloud.points, p.stat_k, p.stat_sigma)]
        idx = idx[radius_inliers(cloud.points[idx], p.radius_r, p.radius_min_n)]
    return (cloud.subset(idx), idx) if return_index else cloud.subset(idx)


def largest_cluster(cloud: PointCloud, p: FilterParams = FilterParams(), return_index: bool = False):
    """Largest DBSCAN cluster (ties go to the cluster found first)."""
    if len(cloud) == 0:
        raise AllNoise("empty cloud")
    labels = DBSCAN(eps=p.dbscan_eps, min_samples=p.dbscan_min_pts).fit(cloud.points).labels_
    valid = labels[labels >= 0]
    if valid.size == 0:
        raise AllNoise(f"no cluster among {len(cloud)} points")
    sizes = np.bincount(valid)
    idx = np.flatnonzero(labels == int(np.argmax(sizes)))
    return (cloud.subset(idx), idx) if return_index else cloud.subset(idx)
