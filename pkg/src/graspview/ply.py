"""Minimal PLY reader/writer for point clouds (ASCII and binary little-endian).

Vertices are written as float32 ``x y z`` plus optional uchar
``red green blue``.  The frame tag travels in a ``comment frame <tag>`` line.
"""
from __future__ import annotations

import io
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .geometry import BASE, Frame, PointCloud

_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


class PlyError(ValueError):
    pass


def to_bytes(cloud: PointCloud, binary: bool = True) -> bytes:
    n = len(cloud)
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if cloud.colors is not None:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    rec = np.empty(n, dtype=fields)
    for i, name in enumerate("xyz"):
        rec[name] = cloud.points[:, i]
    if cloud.colors is not None:
        rgb = np.clip(np.rint(cloud.colors * 255), 0, 255).astype(np.uint8)
        for i, name in enumerate(("red", "green", "blue")):
            rec[name] = rgb[:, i]

    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
              f"comment frame {cloud.frame}", f"element vertex {n}",
              "property float x", "property float y", "property float z"]
    if cloud.colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    out = ("\n".join(header) + "\n").encode("ascii")
    if binary:
        return out + rec.tobytes()
    lines = []
    for row in rec:
        vals = [repr(float(np.float32(row[i]))) for i in range(3)]
        vals += [str(int(row[i])) for i in range(3, len(fields))]
        lines.append(" ".join(vals))
    return out + ("\n".join(lines) + ("\n" if lines else "")).encode("ascii")


def write_ply(path: Union[str, Path], cloud: PointCloud, binary: bool = True) -> None:
    Path(path).write_bytes(to_bytes(cloud, binary=binary))


def _read_header(f: BinaryIO):
    if f.readline().strip() != b"ply":
        raise PlyError("missing 'ply' magic")
    fmt, frame, elements = None, BASE, []
    while True:
        raw = f.readline()
        if not raw:
            raise PlyError("unterminated header")
        line = raw.decode("ascii").strip()
        if line == "end_header":
            break
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "comment" and len(parts) >= 3 and parts[1] == "frame":
            frame = Frame.parse(parts[2])
        elif parts[0] == "element":
            elements.append([parts[1], int(parts[2]), []])
        elif parts[0] == "property":
            if not elements:
                raise PlyError("property before element")
            if parts[1] == "list":
                raise PlyError("list properties are not supported")
            if parts[1] not in _TYPES:
                raise PlyError(f"unknown property type {parts[1]}")
            elements[-1][2].append((parts[2], _TYPES[parts[1]]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise PlyError(f"unsupported format {fmt}")
    return fmt, frame, elements


def from_bytes(data: bytes) -> PointCloud:
    f = io.BytesIO(data)
    fmt, frame, elements = _read_header(f)
    vertex = None
    for name, count, props in elements:
        if fmt == "ascii":
            rows = [f.readline().split() for _ in range(count)]
            if any(len(r) != len(props) for r in rows):
                raise PlyError(f"element {name}: expected {count} rows of {len(props)} values")
            try:
                arr = np.array(rows, dtype=np.float64).reshape(count, len(props))
            except ValueError as exc:
                raise PlyError(f"element {name}: {exc}") from exc
            rec = {p[0]: arr[:, i] for i, p in enumerate(props)}
        else:
            dt = np.dtype([(p, "<" + t) for p, t in props])
            buf = f.read(dt.itemsize * count)
            if len(buf) != dt.itemsize * count:
                raise PlyError(f"truncated element {name}")
            rec = np.frombuffer(buf, dtype=dt)
        if name == "vertex":
            vertex = rec
    if vertex is None:
        raise PlyError("no vertex element")
    names = vertex.keys() if isinstance(vertex, dict) else vertex.dtype.names
    if not {"x", "y", "z"} <= set(names):
        raise PlyError("vertex element lacks x/y/z")
    pts = np.column_stack([np.asarray(vertex[a], dtype=np.float64) for a in "xyz"])
    colors = None
    if {"red", "green", "blue"} <= set(names):
        colors = np.column_stack([np.asarray(vertex[a], dtype=np.float64)
                                  for a in ("red", "green", "blue")]) / 255.0
    return PointCloud(pts, frame, colors)


def read_ply(path: Union[str, Path]) -> PointCloud:
    return from_bytes(Path(path).read_bytes())
