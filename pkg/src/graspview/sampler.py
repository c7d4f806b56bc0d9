"""Conical spherical-cap view candidates with roll-stabilised look-at poses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import DegenerateGeometry
from .geometry import BASE, RigidTransform, camera

EPS = 1e-6


@dataclass(frozen=True)
class ConeSamplerConfig:
    alpha_max: float = math.radians(40.0)
    n_alpha: int = 2
    n_beta: int = 6
    radius_override: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.alpha_max < math.pi / 2:
            raise ValueError("alpha_max must lie in (0, pi/2)")
        if int(self.n_alpha) < 1 or int(self.n_beta) < 1:
            raise ValueError("n_alpha and n_beta must be >= 1")
        if self.radius_override is not None and not self.radius_override > 0:
            raise ValueError("radius_override must be positive")

    @property
    def count(self) -> int:
        return 1 + self.n_alpha * self.n_beta

    def to_dict(self) -> dict:
        return {"alpha_max_deg": math.degrees(self.alpha_max), "n_alpha": self.n_alpha,
                "n_beta": self.n_beta, "radius_override": self.radius_override}

    @classmethod
    def from_dict(cls, d: dict) -> "ConeSamplerConfig":
        return cls(math.radians(float(d.get("alpha_max_deg", 40.0))), int(d.get("n_alpha", 2)),
                   int(d.get("n_beta", 6)), d.get("radius_override"))


@dataclass(eq=False)
class ViewCandidate:
    pose: Optional[RigidTransform]   # camera -> base; None when look-at degenerates
    ring: int
    azimuth: int
    position: np.ndarray
    feasible: bool = True
    score: Optional[object] = None
    cone_angle: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def view_id(self) -> str:
        return f"cand{self.ring}_{self.azimuth}"


def viewing_axis(p0, c):
    """Unit axis from target ``c`` to camera ``p0`` and their distance."""
    d = np.asarray(p0, dtype=np.float64) - np.asarray(c, dtype=np.float64)
    r = float(np.linalg.norm(d))
    if r <= EPS:
        raise DegenerateGeometry("camera coincides with the target centroid")
    return d / r, r


def cone_basis(a: np.ndarray):
    """Deterministic ``(u1, u2)`` spanning the plane orthogonal to ``a``."""
    u1 = np.cross(a, [0.0, 0.0, 1.0])
    if np.linalg.norm(u1) <= EPS:
        u1 = np.cross(a, [1.0, 0.0, 0.0])
    u1 /= np.linalg.norm(u1)
    return u1, np.cross(a, u1)


def sample_cone(cfg: ConeSamplerConfig, p0, c) -> List[tuple]:
    """``[(i, j, position), ...]`` with the axial sample first."""
    a, r = viewing_axis(p0, c)
    if cfg.radius_override is not None:
        r = float(cfg.radius_override)
    c = np.asarray(c, dtype=np.float64)
    u1, u2 = cone_basis(a)
    out = [(0, 0, c + r * a)]
    for i in range(1, cfg.n_alpha + 1):
        alpha = i / cfg.n_alpha * cfg.alpha_max
        for j in range(cfg.n_beta):
            beta = 2.0 * math.pi * j / cfg.n_beta
            d = math.cos(alpha) * a + math.sin(alpha) * (math.cos(beta) * u1 + math.sin(beta) * u2)
            out.append((i, j, c + r * d))
    return out


def look_at_pose(p, c, u_ref, view="cand") -> RigidTransform:
    """Camera-to-base pose at ``p`` with +z towards ``c`` and roll fixed by ``u_ref``."""
    p = np.asarray(p, dtype=np.float64)
    f = np.asarray(c, dtype=np.float64) - p
    n = np.linalg.norm(f)
    if n <= EPS:
        raise DegenerateGeometry("camera position coincides with the target")
    f = f / n
    right = np.cross(np.asarray(u_ref, dtype=np.float64), f)
    m = np.linalg.norm(right)
    if m <= EPS:
        raise DegenerateGeometry("up-reference parallel to the viewing direction")
    right /= m
    up = np.cross(f, right)
    return RigidTransform(np.column_stack([right, up, f]), p, camera(view), BASE)


def generate_candidates(cfg: ConeSamplerConfig, t_bc0: RigidTransform, c,
                        feasible: Optional[Callable[[RigidTransform], bool]] = None
                        ) -> List[ViewCandidate]:
    """All ``1 + n_alpha * n_beta`` candidates around the current camera.

    Degenerate look-ats and poses rejected by ``feasible`` stay in the list
    with ``feasible=False``.
    """
    u_ref = t_bc0.rotation @ np.array([0.0, 1.0, 0.0])
    out = []
    for i, j, pos in sample_cone(cfg, t_bc0.translation, c):
        cand = ViewCandidate(None, i, j, pos, cone_angle=i / cfg.n_alpha * cfg.alpha_max)
        try:
            cand.pose = look_at_pose(pos, c, u_ref, view=cand.view_id)
        except DegenerateGeometry as exc:
            cand.feasible = False
            cand.notes.append(str(exc))
        else:
            if feasible is not None and not feasible(cand.pose):
                cand.feasible = False
                cand.notes.append("kinematically infeasible")
        out.append(cand)
    return out
