"""Metric scale recovery for up-to-scale camera motion and geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DegenerateScale, FrameMismatch, InsufficientViews
from .geometry import PointCloud, RigidTransform, compose, geodesic_angle, invert


@dataclass(frozen=True, eq=False)
class PosePair:
    robot_pose: RigidTransform      # camera -> base, from kinematics
    predicted_pose: RigidTransform  # camera -> predictor world (anchor frame)


class PosePairSequence(list):
    """Synchronised robot / predicted poses; entry 0 is the anchor view.

    Both poses map camera coordinates into their reference frame, so the
    relative motion ``T_0⁻¹ T_k`` is comparable between the two modalities.
    """

    def __init__(self, pairs: Sequence[PosePair] = ()):
        super().__init__(pairs)

    @classmethod
    def from_lists(cls, robot: Sequence[RigidTransform], predicted: Sequence[RigidTransform]):
        if len(robot) != len(predicted):
            raise ValueError("pose lists differ in length")
        return cls(PosePair(r, p) for r, p in zip(robot, predicted))


def _relative(t0: RigidTransform, tk: RigidTransform) -> RigidTransform:
    return compose(invert(t0), tk)


def relative_translations(seq: PosePairSequence) -> List[Tuple[np.ndarray, np.ndarray]]:
    if len(seq) < 2:
        raise InsufficientViews(f"need >= 2 views, got {len(seq)}")
    r0, p0 = seq[0].robot_pose, seq[0].predicted_pose
    return [(_relative(r0, e.robot_pose).translation.copy(),
             _relative(p0, e.predicted_pose).translation.copy()) for e in seq[1:]]


def alignment_objective(rel, lam: float) -> float:
    return float(sum(np.sum((np.asarray(r) - lam * np.asarray(p)) ** 2) for r, p in rel))


def recover_scale(rel) -> float:
    """Closed-form least-squares scale ``Σ⟨Δp, Δr⟩ / Σ|Δp|²``."""
    if len(rel) < 1:
        raise InsufficientViews("no relative motions")
    num = sum(float(np.dot(p, r)) for r, p in rel)
    den = sum(float(np.dot(p, p)) for _, p in rel)
    if den <= 1e-12:
        raise DegenerateScale("predicted motion vanishes")
    lam = num / den
    if not lam > 0:
        raise DegenerateScale(f"non-positive scale {lam:.4g}: prediction anti-correlated with motion")
    return lam


def rescale_to_bv(points_w: PointCloud, lam: float, t_w_bv: RigidTransform) -> PointCloud:
    """Scale predictor-world points by ``lam`` and map them into the BV camera."""
    if not lam > 0:
        raise DegenerateScale("scale must be positive")
    if points_w.frame != t_w_bv.src:
        raise FrameMismatch(f"cloud in {points_w.frame}, transform expects {t_w_bv.src}")
    return PointCloud(t_w_bv.apply(lam * points_w.points), t_w_bv.dst, points_w.colors)


def scaled(t: RigidTransform, lam: float) -> RigidTransform:
    return RigidTransform(t.rotation, lam * t.translation, t.src, t.dst)


def pose_errors(seq: PosePairSequence, lam: float) -> dict:
    """Median errors between observed camera poses and predicted ones mapped
    into the base via the anchor's kinematic pose and scale ``lam``.

    Translation in metres, rotation in degrees; the anchor is excluded.
    """
    if len(seq) < 2:
        raise InsufficientViews("need >= 2 views")
    r0, p0 = seq[0].robot_pose, seq[0].predicted_pose
    rot, trans = [], []
    for e in seq[1:]:
        rel = scaled(_relative(p0, e.predicted_pose), lam)
        pred = compose(r0, rel)
        trans.append(float(np.linalg.norm(pred.translation - e.robot_pose.translation)))
        rot.append(math.degrees(geodesic_angle(pred.rotation, e.robot_pose.rotation)))
    return {"rot_deg": float(np.median(rot)), "trans_m": float(np.median(trans))}
