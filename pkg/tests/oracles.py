"""Brute-force reference implementations used by the tests.

These deliberately avoid the package's own helpers (no shared projection,
rounding or neighbour-search code) so agreement is meaningful.
"""
import math
from collections import deque

import numpy as np


def mat4(rotation, translation):
    m = np.eye(4)
    m[:3, :3] = rotation
    m[:3, 3] = translation
    return m


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def pixel_of(fx, fy, cx, cy, p):
    """Rounded pixel (half-up) of a camera-frame point, scalar arithmetic."""
    x, y, z = p
    u = fx * x / z + cx
    v = fy * y / z + cy
    return int(math.floor(u + 0.5)), int(math.floor(v + 0.5))


def zbuffer(points_cam, fx, fy, cx, cy, w, h, radius, near, far):
    """Per-pixel minimum depth and winning index, one point at a time."""
    depth = [[math.inf] * w for _ in range(h)]
    index = [[-1] * w for _ in range(h)]
    for i, p in enumerate(points_cam):
        z = float(p[2])
        if z < near or z > far:
            continue
        u0, v0 = pixel_of(fx, fy, cx, cy, p)
        for v in range(v0 - radius, v0 + radius + 1):
            for u in range(u0 - radius, u0 + radius + 1):
                if 0 <= u < w and 0 <= v < h and z < depth[v][u]:
                    depth[v][u] = z
                    index[v][u] = i
    return np.array(depth), np.array(index)


def mask_select(points_base, mask, fx, fy, cx, cy, near, r_cb, t_cb):
    """Per-point definition of mask-based selection."""
    h, w = mask.shape
    keep = []
    for i, xb in enumerate(points_base):
        xc = r_cb @ xb + t_cb
        if xc[2] < near:
            continue
        u, v = pixel_of(fx, fy, cx, cy, xc)
        if 0 <= u < w and 0 <= v < h and mask[v, u]:
            keep.append(i)
    return keep


def dbscan_components(points, eps, min_pts):
    """Connected components of core points in the eps-graph, border points
    attached to the first (lowest-id) component that reaches them."""
    n = len(points)
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    nbr = [np.flatnonzero(d2[i] <= eps * eps) for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in nbr])
    comp = -np.ones(n, dtype=int)
    c = 0
    for s in range(n):
        if not core[s] or comp[s] >= 0:
            continue
        comp[s] = c
        q = deque([s])
        while q:
            i = q.popleft()
            for j in nbr[i]:
                if core[j] and comp[j] < 0:
                    comp[j] = c
                    q.append(j)
        c += 1
    cores_by_comp = [set(np.flatnonzero((comp == k) & core)) for k in range(c)]
    members = [set(s) for s in cores_by_comp]
    for i in range(n):
        if core[i]:
            continue
        for k in range(c):
            if any(j in cores_by_comp[k] for j in nbr[i]):
                members[k].add(i)
    return members, core


def knn_mean_dist(points, k):
    n = len(points)
    out = np.empty(n)
    for i in range(n):
        d = np.sqrt(((points - points[i]) ** 2).sum(1))
        d[i] = np.inf
        out[i] = np.sort(d)[:k].mean()
    return out


def radius_count(points, r):
    d = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    return (d <= r).sum(1) - 1
