"""Primitive solids: surface point sampling and analytic ray intersection.

All primitives are centred on their local origin with +z up.  ``size`` is
the axis-aligned bounding box (x, y, z) in metres; cylinders use
``size[0]`` as diameter.
"""
from __future__ import annotations

import math

import numpy as np

SHAPES = ("box", "cylinder", "sphere", "composite")


def _grid(a: float, b: float, spacing: float):
    na = max(1, int(math.ceil(a / spacing)))
    nb = max(1, int(math.ceil(b / spacing)))
    u = (np.arange(na) + 0.5) / na * a - a / 2
    v = (np.arange(nb) + 0.5) / nb * b - b / 2
    uu, vv = np.meshgrid(u, v, indexing="ij")
    return uu.ravel(), vv.ravel()


def sample_box(size, spacing):
    sx, sy, sz = size
    out = []
    for axis, (a, b, half) in enumerate([(sy, sz, sx / 2), (sx, sz, sy / 2), (sx, sy, sz / 2)]):
        u, v = _grid(a, b, spacing)
        for sign in (-1.0, 1.0):
            w = np.full_like(u, sign * half)
            cols = [u, v]
            cols.insert(axis, w)
            out.append(np.column_stack(cols))
    return np.concatenate(out)


def _disc(r, spacing):
    pts = [np.zeros((1, 2))]
    nr = max(1, int(math.ceil(r / spacing)))
    for i in range(1, nr + 1):
        rho = i / nr * r
        n = max(6, int(math.ceil(2 * math.pi * rho / spacing)))
        th = 2 * math.pi * (np.arange(n) + 0.5 * (i % 2)) / n
        pts.append(np.column_stack([rho * np.cos(th), rho * np.sin(th)]))
    return np.concatenate(pts)


def sample_cylinder(size, spacing):
    r, h = size[0] / 2, size[2]
    nt = max(8, int(math.ceil(2 * math.pi * r / spacing)))
    nz = max(1, int(math.ceil(h / spacing)))
    th, z = np.meshgrid(2 * math.pi * np.arange(nt) / nt, (np.arange(nz) + 0.5) / nz * h - h / 2,
                        indexing="ij")
    side = np.column_stack([r * np.cos(th.ravel()), r * np.sin(th.ravel()), z.ravel()])
    d = _disc(r, spacing)
    caps = [np.column_stack([d, np.full(len(d), s * h / 2)]) for s in (-1.0, 1.0)]
    return np.concatenate([side] + caps)


def sample_sphere(size, spacing):
    r = size[0] / 2
    n = max(20, int(math.ceil(4 * math.pi * r * r / spacing ** 2)))
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = math.pi * (1 + 5 ** 0.5) * i
    return r * np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])


def composite_parts(size):
    """Box body with a cylindrical neck on top: ``[(shape, size, z_offset)]``."""
    sx, sy, sz = size
    body_h, neck_h = 0.65 * sz, 0.35 * sz
    neck_d = 0.5 * min(sx, sy)
    return [("box", (sx, sy, body_h), -sz / 2 + body_h / 2),
            ("cylinder", (neck_d, neck_d, neck_h), sz / 2 - neck_h / 2)]


def sample_surface(shape: str, size, spacing: float) -> np.ndarray:
    if shape == "box":
        return sample_box(size, spacing)
    if shape == "cylinder":
        return sample_cylinder(size, spacing)
    if shape == "sphere":
        return sample_sphere(size, spacing)
    if shape == "composite":
        parts = [sample_surface(s, sz, spacing) + [0, 0, dz] for s, sz, dz in composite_parts(size)]
        return np.concatenate(parts)
    raise ValueError(f"unknown shape {shape!r}")


def _ray_box(o, d, half):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - o) * inv
        t2 = (half - o) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=1)
    tmax = np.nanmin(np.maximum(t1, t2), axis=1)
    hit = (tmax >= np.maximum(tmin, 0.0))
    t = np.where(tmin > 0, tmin, tmax)
    return np.where(hit & (t > 0), t, np.inf)


def _ray_sphere(o, d, r):
    b = np.sum(o * d, axis=1)
    c = np.sum(o * o, axis=1) - r * r
    disc = b * b - c
    sq = np.sqrt(np.maximum(disc, 0.0))
    t0, t1 = -b - sq, -b + sq
    t = np.where(t0 > 0, t0, t1)
    return np.where((disc >= 0) & (t > 0), t, np.inf)


def _ray_cylinder(o, d, r, hz):
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
    disc = b * b - a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    best = np.full(len(o), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in ((-b - sq) / a, (-b + sq) / a):
            z = o[:, 2] + t * d[:, 2]
            ok = (disc >= 0) & (a > 1e-15) & (t > 0) & (np.abs(z) <= hz)
            best = np.where(ok & (t < best), t, best)
        for zc in (-hz, hz):
            t = (zc - o[:, 2]) / d[:, 2]
            x = o[:, 0] + t * d[:, 0]
            y = o[:, 1] + t * d[:, 1]
            ok = (t > 0) & (x * x + y * y <= r * r)
            best = np.where(ok & (t < best), t, best)
    return best


def ray_intersect(shape: str, size, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Distance along each unit ray to the first surface hit (``inf`` on miss),
    rays given in the primitive's local frame."""
    size = np.asarray(size, dtype=np.float64)
    if shape == "box":
        return _ray_box(origins, dirs, size / 2)
    if shape == "sphere":
        return _ray_sphere(origins, dirs, size[0] / 2)
    if shape == "cylinder":
        return _ray_cylinder(origins, dirs, size[0] / 2, size[2] / 2)
    if shape == "composite":
        ts = [ray_intersect(s, sz, origins - [0, 0, dz], dirs) for s, sz, dz in composite_parts(size)]
        return np.minimum.reduce(ts)
    raise ValueError(f"unknown shape {shape!r}")


def footprint_radius(shape: str, size) -> float:
    if shape in ("cylinder", "sphere"):
        return size[0] / 2
    return math.hypot(size[0], size[1]) / 2


def principal_axis(shape: str, size):
    """Local unit axis of greatest extent, or ``None`` when orientation-free."""
    if shape == "sphere":
        return None
    if shape in ("cylinder", "composite") and size[2] >= max(size[0], size[1]):
        return np.array([0.0, 0.0, 1.0])
    return np.eye(3)[int(np.argmax(size))]
