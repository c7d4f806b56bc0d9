"""Z-buffer splat kernels.

Both variants resolve each pixel to the point with the smallest depth, ties
going to the lower point index, so their outputs are identical.
"""
import numpy as np

from ._jit import USE_NUMBA, njit


@njit(cache=True)
def splat_loops(px, py, z, h, w, radius):
    depth = np.full((h, w), np.inf)
    index = np.full((h, w), -1, dtype=np.int64)
    for i in range(px.shape[0]):
        zi = z[i]
        v0 = max(py[i] - radius, 0)
        v1 = min(py[i] + radius, h - 1)
        u0 = max(px[i] - radius, 0)
        u1 = min(px[i] + radius, w - 1)
        for v in range(v0, v1 + 1):
            for u in range(u0, u1 + 1):
                if zi < depth[v, u]:
                    depth[v, u] = zi
                    index[v, u] = i
    return index, depth


def splat_numpy(px, py, z, h, w, radius):
    depth = np.full((h, w), np.inf)
    index = np.full((h, w), -1, dtype=np.int64)
    n = px.shape[0]
    if n == 0:
        return index, depth
    off = np.arange(-radius, radius + 1)
    du, dv = np.meshgrid(off, off)
    uu = (px[:, None] + du.ravel()[None, :]).ravel()
    vv = (py[:, None] + dv.ravel()[None, :]).ravel()
    pid = np.repeat(np.arange(n, dtype=np.int64), du.size)
    ok = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
    uu, vv, pid = uu[ok], vv[ok], pid[ok]
    flat = vv * w + uu
    order = np.lexsort((pid, z[pid], flat))
    flat, pid = flat[order], pid[order]
    first = np.ones(len(flat), dtype=bool)
    first[1:] = flat[1:] != flat[:-1]
    index.ravel()[flat[first]] = pid[first]
    depth.ravel()[flat[first]] = z[pid[first]]
    return index, depth


def splat(px, py, z, h, w, radius):
    px = np.ascontiguousarray(px, dtype=np.int64)
    py = np.ascontiguousarray(py, dtype=np.int64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    fn = splat_loops if USE_NUMBA else splat_numpy
    return fn(px, py, z, int(h), int(w), int(radius))
