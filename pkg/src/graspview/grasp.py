"""Grasp mapping into the base frame, orientation refinement and planning.

End-effector convention: +z is the approach direction (gripper towards the
object), +x the jaw closing axis, +y = z × x.
"""
from __future__ import annotations

import json
import math
import urllib.request
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import ply
from .errors import FrameMismatch, NeedsReperception
from .geometry import (BASE, END_EFFECTOR, PointCloud, RigidTransform, compose,
                       geodesic_angle, invert, rotation_about)

DOWN = np.array([0.0, 0.0, -1.0])
TOPDOWN_FLOOR = 0.05


@dataclass(eq=False)
class GraspCandidate:
    pose: RigidTransform            # end-effector -> grasp-view camera
    width: float
    proposer_score: float
    approach_axis: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("grasp width must be >= 0")
        if self.approach_axis is None:
            self.approach_axis = self.pose.rotation[:, 2].copy()
        a = np.asarray(self.approach_axis, dtype=np.float64)
        if abs(np.linalg.norm(a) - 1.0) > 1e-6:
            raise ValueError("approach axis must be unit length")
        self.approach_axis = a


@dataclass(eq=False)
class ExecutionPlan:
    pre_grasp: RigidTransform
    grasp: RigidTransform
    lift: RigidTransform
    offset_d: float
    rank_used: int
    width: float = 0.0


@dataclass(frozen=True)
class GripperModel:
    """Box proxy: two jaws plus a palm, in the end-effector frame."""

    jaw_thickness: float = 0.02     # along closing axis
    jaw_width: float = 0.08         # along y
    jaw_length: float = 0.06        # along approach
    palm_depth: float = 0.06
    tip_reach: float = 0.015        # fingertips beyond the grasp point
    opening_margin: float = 0.01
    max_width: float = 0.10

    def boxes(self, width: float) -> List[tuple]:
        half = min(width, self.max_width) / 2 + self.opening_margin
        outer = half + self.jaw_thickness
        y = self.jaw_width / 2
        z1 = self.tip_reach
        z0 = z1 - self.jaw_length
        return [
            (np.array([half, -y, z0]), np.array([outer, y, z1])),
            (np.array([-outer, -y, z0]), np.array([-half, y, z1])),
            (np.array([-outer, -y, z0 - self.palm_depth]), np.array([outer, y, z0])),
        ]


class KinematicModel:
    """Default reachability/collision proxy: workspace sphere, table
    half-space on the end-effector origin, gripper boxes vs points."""

    def __init__(self, workspace_radius: float = 0.9, table_height: float = 0.0,
                 gripper: GripperModel = GripperModel(), collision_min_points: int = 3):
        self.workspace_radius = workspace_radius
        self.table_height = table_height
        self.gripper = gripper
        self.collision_min_points = collision_min_points

    def reachable(self, pose: RigidTransform) -> bool:
        t = pose.translation
        return bool(np.linalg.norm(t) <= self.workspace_radius and t[2] >= self.table_height)

    def collides(self, pose: RigidTransform, cloud: PointCloud, width: float = None) -> bool:
        if cloud.frame != pose.dst:
            raise FrameMismatch(f"pose targets {pose.dst}, cloud in {cloud.frame}")
        if len(cloud) == 0:
            return False
        local = invert(pose).apply(cloud.points)
        w = self.gripper.max_width if width is None else width
        inside = np.zeros(len(local), dtype=bool)
        for lo, hi in self.gripper.boxes(w):
            inside |= np.all((local >= lo) & (local <= hi), axis=1)
        return int(inside.sum()) >= self.collision_min_points

    def camera_feasible(self, pose: RigidTransform, clearance: float = 0.05) -> bool:
        t = pose.translation
        return bool(np.linalg.norm(t) <= self.workspace_radius
                    and t[2] >= self.table_height + clearance)


def grasp_to_base(g: GraspCandidate, t_bc: RigidTransform) -> RigidTransform:
    return compose(t_bc, g.pose)


def symmetry_orbit(t_be: RigidTransform, folds: int = 2) -> List[RigidTransform]:
    out = [t_be]
    for k in range(1, folds):
        r = rotation_about([0, 0, 1], 2 * math.pi * k / folds)
        out.append(RigidTransform(t_be.rotation @ r, t_be.translation, t_be.src, t_be.dst))
    return out


def align_symmetry(t_be: RigidTransform, wrist: RigidTransform, folds: int = 2) -> RigidTransform:
    """Member of the gripper symmetry orbit closest in rotation to ``wrist``;
    ties keep the input."""
    best, best_d = t_be, geodesic_angle(t_be.rotation, wrist.rotation)
    for cand in symmetry_orbit(t_be, folds)[1:]:
        d = geodesic_angle(cand.rotation, wrist.rotation)
        if d < best_d:
            best, best_d = cand, d
    return best


def topdown_key(g: GraspCandidate, t_bc: RigidTransform) -> float:
    a = t_bc.rotation @ g.approach_axis
    return g.proposer_score * max(float(a @ DOWN), TOPDOWN_FLOOR)


def rank_grasps(grasps: Sequence[GraspCandidate], t_bc: RigidTransform) -> List[GraspCandidate]:
    return sorted(grasps, key=lambda g: -topdown_key(g, t_bc))


def offset_along_approach(pose: RigidTransform, dist: float) -> RigidTransform:
    return RigidTransform(pose.rotation, pose.translation + dist * pose.rotation[:, 2],
                          pose.src, pose.dst)


def plan_execution(ranked: Sequence[RigidTransform], d: float, global_cloud: PointCloud,
                   kin: KinematicModel, widths: Optional[Sequence[float]] = None,
                   lift_dz: float = 0.15) -> ExecutionPlan:
    """First grasp (in rank order) whose pre-grasp and grasp are reachable and
    collision free.  Raises :class:`NeedsReperception` when none is."""
    if not d > 0:
        raise ValueError("pre-grasp offset must be positive")
    reasons = []
    for rank, grasp in enumerate(ranked):
        w = None if widths is None else widths[rank]
        pre = offset_along_approach(grasp, -d)
        if not (kin.reachable(pre) and kin.reachable(grasp)):
            reasons.append((rank, "unreachable"))
            continue
        if kin.collides(pre, global_cloud, w) or kin.collides(grasp, global_cloud, w):
            reasons.append((rank, "collision"))
            continue
        lift = RigidTransform(grasp.rotation, grasp.translation + [0.0, 0.0, lift_dz],
                              grasp.src, grasp.dst)
        return ExecutionPlan(pre, grasp, lift, d, rank, 0.0 if w is None else float(w))
    raise NeedsReperception(reasons)


class AntipodalProposer:
    """Deterministic stand-in for a learned grasp network.

    Grasps sit at the cloud centroid along the principal axis and at the
    extent midpoint across it, with the jaws closing perpendicular to that
    axis; approach directions sweep the plane orthogonal to it.  Input must
    be expressed in a camera frame.
    """

    def __init__(self, max_width: float = 0.10, n_approach: int = 8):
        self.max_width = max_width
        self.n_approach = n_approach

    def propose(self, cloud: PointCloud) -> List[GraspCandidate]:
        if cloud.frame.name != "camera":
            raise FrameMismatch(f"grasp proposer expects a camera-frame cloud, got {cloud.frame}")
        if len(cloud) < 3:
            return []
        pts = cloud.points
        center = pts.mean(axis=0)
        _, vecs = np.linalg.eigh(np.cov((pts - center).T))
        major = vecs[:, 2]
        major = major * np.sign(major[np.argmax(np.abs(major))])
        e2, e3 = vecs[:, 1], np.cross(major, vecs[:, 1])
        out = []
        for k in range(self.n_approach):
            th = 2 * math.pi * k / self.n_approach
            z = math.cos(th) * e2 + math.sin(th) * e3
            x = np.cross(major, z)
            proj = (pts - center) @ x
            width = float(proj.max() - proj.min())
            if width > self.max_width:
                continue
            # centre between the jaws and mid-depth, so one-sided views of
            # the object do not pull the grasp towards the camera
            depth = (pts - center) @ z
            pos = (center + 0.5 * (proj.max() + proj.min()) * x
                   + 0.5 * (depth.max() + depth.min()) * z)
            rot = np.column_stack([x, major, z])
            pose = RigidTransform(rot, pos, END_EFFECTOR, cloud.frame)
            out.append(GraspCandidate(pose, width, max(0.0, 1.0 - width / self.max_width)))
        return out


def parse_grasp_reply(body: bytes, frame) -> List[GraspCandidate]:
    """``[{pose: [r00..r22, tx, ty, tz], width, score}, ...]`` → candidates."""
    data = json.loads(body.decode("utf-8"))
    if not isinstance(data, list):
        raise ValueError("grasp reply must be a JSON list")
    out = []
    for item in data:
        vals = np.asarray(item["pose"], dtype=np.float64)
        if vals.shape != (12,):
            raise ValueError("grasp pose needs 12 numbers")
        pose = RigidTransform(vals[:9].reshape(3, 3), vals[9:], END_EFFECTOR, frame)
        out.append(GraspCandidate(pose, float(item["width"]),
                                  min(1.0, max(0.0, float(item["score"])))))
    return out


def grasp_reply(grasps: Sequence[GraspCandidate]) -> bytes:
    return json.dumps([{"pose": list(g.pose.rotation.ravel()) + list(g.pose.translation),
                        "width": g.width, "score": g.proposer_score} for g in grasps]).encode()


class HttpGraspProposer:
    """Remote proposer: POST a camera-frame PLY, receive a JSON grasp list."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def propose(self, cloud: PointCloud) -> List[GraspCandidate]:
        if cloud.frame.name != "camera":
            raise FrameMismatch(f"grasp proposer expects a camera-frame cloud, got {cloud.frame}")
        req = urllib.request.Request(self.url, data=ply.to_bytes(cloud, binary=True),
                                     headers={"Content-Type": "application/octet-stream"},
                                     method="POST")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return parse_grasp_reply(resp.read(), cloud.frame)
