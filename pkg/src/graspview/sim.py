"""Synthetic tabletop scenes, simulated wrist capture and a surrogate
up-to-scale geometry predictor."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import shapes
from .alignment import PosePairSequence, pose_errors, recover_scale, relative_translations
from .errors import GraspViewError, PlacementFailure, ScorerUnavailable
from .geometry import (BASE, OBJECT, WORLD_PRED, CameraIntrinsics, PointCloud, RigidTransform,
                       backproject_depth, camera, compose, invert, look_rotation, pixel_index,
                       project_points, rotation_about)
from .pipeline import Capture, Pipeline, PipelineConfig, Prediction
from .renderer import RenderSettings, splat_render

LEVELS = ("easy", "medium", "hard")
VISIBILITY_BANDS = {"easy": (0.7, 1.0), "medium": (0.35, 0.65), "hard": (0.0, 0.3)}
MIN_VISIBLE_PIXELS = 15
MAX_PLACEMENT_ATTEMPTS = 1000
TARGET_SPACING = 0.002
OBSTACLE_SPACING = 0.003
CAMERA_STANDOFF = 0.45
CAMERA_ELEVATION = math.radians(30.0)
TARGET_COLOR = (0.85, 0.12, 0.10)


def default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(fx=200.0, fy=200.0, cx=80.0, cy=60.0, width=160, height=120,
                            near=0.05, far=1.0)


def _pose_dict(t: RigidTransform) -> dict:
    return {"rotation": t.rotation.tolist(), "translation": t.translation.tolist()}


def _pose_from(d: dict) -> RigidTransform:
    return RigidTransform(np.array(d["rotation"]), np.array(d["translation"]), OBJECT, BASE)


@dataclass(eq=False)
class SceneObject:
    shape: str
    size: tuple
    pose: Optional[RigidTransform]      # object -> base; None = place automatically
    color: tuple = (0.6, 0.6, 0.6)
    is_target: bool = False

    def __post_init__(self):
        if self.shape not in shapes.SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        self.size = tuple(float(s) for s in self.size)
        if len(self.size) != 3 or min(self.size) <= 0:
            raise ValueError("size must be three positive lengths")
        self.color = tuple(float(c) for c in self.color)

    def to_dict(self) -> dict:
        return {"shape": self.shape, "size": list(self.size),
                "pose": None if self.pose is None else _pose_dict(self.pose),
                "color": list(self.color), "is_target": self.is_target}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneObject":
        pose = d.get("pose")
        return cls(d["shape"], tuple(d["size"]), None if pose is None else _pose_from(pose),
                   tuple(d.get("color", (0.6, 0.6, 0.6))), bool(d.get("is_target", False)))


@dataclass(eq=False)
class SceneSpec:
    objects: List[SceneObject]
    table_height: float = 0.0
    occlusion_level: str = "easy"
    seed: int = 0

    def __post_init__(self):
        if self.occlusion_level not in LEVELS:
            raise ValueError(f"occlusion_level must be one of {LEVELS}")
        targets = [o for o in self.objects if o.is_target]
        if len(targets) != 1:
            raise ValueError("scene needs exactly one target")
        if targets[0].pose is None:
            raise ValueError("the target needs an explicit pose")

    @property
    def target(self) -> SceneObject:
        return next(o for o in self.objects if o.is_target)

    def to_dict(self) -> dict:
        return {"objects": [o.to_dict() for o in self.objects], "table_height": self.table_height,
                "occlusion_level": self.occlusion_level, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls([SceneObject.from_dict(o) for o in d["objects"]], float(d.get("table_height", 0.0)),
                   d.get("occlusion_level", "easy"), int(d.get("seed", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls.from_dict(json.loads(text))


def upright_pose(x: float, y: float, z: float, yaw: float) -> RigidTransform:
    return RigidTransform(rotation_about([0, 0, 1], yaw), [x, y, z], OBJECT, BASE)


def home_camera_pose(target_center, standoff: float = CAMERA_STANDOFF,
                     elevation: float = CAMERA_ELEVATION) -> RigidTransform:
    """Initial wrist camera: on the robot side of the target, looking at it."""
    c = np.asarray(target_center, dtype=np.float64)
    toward_base = -c[:2] / max(np.linalg.norm(c[:2]), 1e-9)
    d = np.array([math.cos(elevation) * toward_base[0], math.cos(elevation) * toward_base[1],
                  math.sin(elevation)])
    p = c + standoff * d
    return RigidTransform(look_rotation(c - p), p, camera("v0"), BASE)


def make_scene_spec(level: str, seed: int, table_height: float = 0.0) -> SceneSpec:
    """Random target plus level-dependent obstacles (occluders left unposed)."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    rng = np.random.default_rng([seed, LEVELS.index(level)])
    shape = ["box", "cylinder", "sphere", "composite"][int(rng.choice(4, p=[0.35, 0.35, 0.1, 0.2]))]
    if shape == "box":
        long_, mid = rng.uniform(0.09, 0.13), rng.uniform(0.04, 0.06)
        size = (long_, mid, rng.uniform(0.035, 0.05)) if rng.random() < 0.5 else \
            (mid, rng.uniform(0.035, 0.05), long_)
    elif shape == "cylinder":
        dia = rng.uniform(0.04, 0.06)
        size = (dia, dia, rng.uniform(1.6, 2.4) * dia)
    elif shape == "sphere":
        dia = rng.uniform(0.05, 0.07)
        size = (dia, dia, dia)
    else:
        size = (rng.uniform(0.045, 0.06), rng.uniform(0.045, 0.06), rng.uniform(0.10, 0.13))
    x, y = 0.5 + rng.uniform(-0.05, 0.05), rng.uniform(-0.08, 0.08)
    target = SceneObject(shape, size, upright_pose(x, y, table_height + size[2] / 2,
                                                    rng.uniform(-math.pi, math.pi)),
                         TARGET_COLOR, True)
    tw = 2 * shapes.footprint_radius(shape, size)
    th = size[2]
    objects = [target]

    n_occ = {"easy": int(rng.random() < 0.7), "medium": 1, "hard": 1}[level]
    for _ in range(n_occ):
        if level == "easy":
            osz = (rng.uniform(0.03, 0.05), tw * rng.uniform(0.8, 1.3), th * rng.uniform(0.25, 0.5))
        elif level == "medium":
            osz = (rng.uniform(0.03, 0.05), tw * rng.uniform(0.9, 1.3), th * rng.uniform(0.8, 1.4))
        else:
            osz = (rng.uniform(0.03, 0.05), tw + rng.uniform(0.04, 0.07), th + rng.uniform(0.05, 0.08))
        gray = rng.uniform(0.3, 0.7)
        objects.append(SceneObject("box", osz, None, (gray, gray, rng.uniform(0.5, 0.9))))

    # a distractor beside the target, away from the line of sight
    toward_base = -np.array([x, y]) / math.hypot(x, y)
    side = np.array([-toward_base[1], toward_base[0]]) * (1 if rng.random() < 0.5 else -1)
    dsz = (rng.uniform(0.04, 0.07), rng.uniform(0.04, 0.07), rng.uniform(0.04, 0.10))
    dxy = np.array([x, y]) + side * rng.uniform(0.16, 0.22) - toward_base * rng.uniform(0.0, 0.08)
    objects.append(SceneObject("box", dsz, upright_pose(dxy[0], dxy[1], table_height + dsz[2] / 2,
                                                        rng.uniform(-math.pi, math.pi)),
                               (0.2, rng.uniform(0.5, 0.8), 0.25)))
    return SceneSpec(objects, table_height, level, seed)


def camera_rays(k: CameraIntrinsics, pose: RigidTransform, pixels=None):
    """Base-frame ray origins and unit directions through pixel centres."""
    h, w = k.shape
    if pixels is None:
        v, u = np.mgrid[0:h, 0:w]
        u, v = u.ravel(), v.ravel()
    else:
        u, v = pixels
    d = np.column_stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones(len(u))])
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    dirs = d @ pose.rotation.T
    return np.broadcast_to(pose.translation, dirs.shape).copy(), dirs


def raycast_object(obj: SceneObject, origins, dirs) -> np.ndarray:
    inv = invert(obj.pose)
    return shapes.ray_intersect(obj.shape, obj.size, inv.apply(origins), dirs @ inv.rotation.T)


def raycast_visibility(objects: Sequence[SceneObject], k: CameraIntrinsics,
                       pose: RigidTransform) -> tuple:
    """Exact visible fraction of the target from ``pose``: target pixels with
    nothing nearer, over target pixels with every other object removed.
    Returns ``(fraction, visible_pixel_count)``."""
    o, d = camera_rays(k, pose)
    target = next(ob for ob in objects if ob.is_target)
    t_target = raycast_object(target, o, d)
    # depth along the optical axis for near/far culling
    zc = t_target * (d @ pose.rotation[:, 2])
    tpix = np.isfinite(t_target) & (zc >= k.near) & (zc <= k.far)
    if not tpix.any():
        return 0.0, 0
    o, d, t_target = o[tpix], d[tpix], t_target[tpix]
    t_other = np.full(len(o), np.inf)
    for ob in objects:
        if ob is not target:
            t_other = np.minimum(t_other, raycast_object(ob, o, d))
    vis = t_target < t_other
    return float(vis.mean()), int(vis.sum())


def _footprint(ob: SceneObject, n_circle: int = 16) -> np.ndarray:
    """Convex base-frame footprint polygon (table plane) of an upright solid."""
    if ob.shape in ("cylinder", "sphere"):
        th = 2 * math.pi * np.arange(n_circle) / n_circle
        # circumscribed polygon so the test stays conservative
        r = ob.size[0] / 2 / math.cos(math.pi / n_circle)
        local = np.column_stack([r * np.cos(th), r * np.sin(th), np.zeros(n_circle)])
    else:
        hx, hy = ob.size[0] / 2, ob.size[1] / 2
        local = np.array([[-hx, -hy, 0], [hx, -hy, 0], [hx, hy, 0], [-hx, hy, 0]])
    return ob.pose.apply(local)[:, :2]


def surface_visible(objects: Sequence[SceneObject], k: CameraIntrinsics, pose: RigidTransform,
                    points: np.ndarray, eps: float = 5e-4) -> np.ndarray:
    """Per base-frame surface sample: inside the frustum and not hidden by any
    solid (itself included) along the ray from the camera centre."""
    pc = invert(pose).apply(points)
    uv, z, ok = project_points(k, pc)
    ij = pixel_index(uv)
    h, w = k.shape
    ok &= (z <= k.far) & (ij[:, 0] >= 0) & (ij[:, 0] < w) & (ij[:, 1] >= 0) & (ij[:, 1] < h)
    vis = np.zeros(len(points), dtype=bool)
    if not ok.any():
        return vis
    o = np.broadcast_to(pose.translation, (int(ok.sum()), 3)).copy()
    d = points[ok] - o
    dist = np.linalg.norm(d, axis=1)
    d /= dist[:, None]
    first = np.full(len(o), np.inf)
    for ob in objects:
        first = np.minimum(first, raycast_object(ob, o, d))
    vis[ok] = first >= dist - eps
    return vis


def _overlaps(a: SceneObject, b: SceneObject, gap: float = 0.005) -> bool:
    """Separating-axis test on the footprints, with ``gap`` clearance."""
    pa, pb = _footprint(a), _footprint(b)
    for poly in (pa, pb):
        edges = np.roll(poly, -1, axis=0) - poly
        for nx, ny in np.column_stack([-edges[:, 1], edges[:, 0]]):
            n = np.array([nx, ny]) / math.hypot(nx, ny)
            da, db = pa @ n, pb @ n
            if da.max() + gap <= db.min() or db.max() + gap <= da.min():
                return False
    return True


def place_occluders(spec: SceneSpec, k: CameraIntrinsics) -> SceneSpec:
    """Give every unposed obstacle a pose between the initial camera and the
    target so the initial visible fraction falls in the level's band."""
    pending = [o for o in spec.objects if o.pose is None]
    if not pending:
        return spec
    target = spec.target
    cam = home_camera_pose(target.pose.translation)
    rng = np.random.default_rng([spec.seed, 7919])
    lo, hi = VISIBILITY_BANDS[spec.occlusion_level]
    c = target.pose.translation
    sight = cam.translation[:2] - c[:2]
    sight /= np.linalg.norm(sight)
    lateral = np.array([-sight[1], sight[0]])
    rt = shapes.footprint_radius(target.shape, target.size)
    fixed = [o for o in spec.objects if o.pose is not None]
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        placed = []
        for ob in pending:
            ro = shapes.footprint_radius(ob.shape, ob.size)
            dist = rt + ob.size[0] / 2 + rng.uniform(0.01, 0.07)
            off = rng.uniform(-0.06, 0.06)
            xy = c[:2] + dist * sight + off * lateral
            yaw = math.atan2(sight[1], sight[0]) + rng.uniform(-0.35, 0.35)
            placed.append(SceneObject(ob.shape, ob.size,
                                      upright_pose(xy[0], xy[1], spec.table_height + ob.size[2] / 2, yaw),
                                      ob.color, False))
        others = fixed + placed
        if any(_overlaps(p, q) for i, p in enumerate(others) for q in others[i + 1:]):
            continue
        frac, npix = raycast_visibility(others, k, cam)
        if lo <= frac <= hi and npix >= MIN_VISIBLE_PIXELS:
            it = iter(placed)
            objects = [o if o.pose is not None else next(it) for o in spec.objects]
            return SceneSpec(objects, spec.table_height, spec.occlusion_level, spec.seed)
    raise PlacementFailure(f"{spec.occlusion_level} scene seed {spec.seed}: no placement in "
                           f"{MAX_PLACEMENT_ATTEMPTS} attempts")


@dataclass(eq=False)
class GroundTruth:
    """Evaluator-only information."""

    target: SceneObject
    target_cloud: PointCloud
    true_scale: float
    initial_visibility: float
    view_poses: dict = field(default_factory=dict)


@dataclass(eq=False)
class Scene:
    spec: SceneSpec
    cloud: PointCloud           # all surfaces, base frame, coloured
    labels: np.ndarray          # object index per point
    intrinsics: CameraIntrinsics
    initial_pose: RigidTransform
    truth: GroundTruth

    @property
    def target_index(self) -> int:
        return next(i for i, o in enumerate(self.spec.objects) if o.is_target)


def build_scene(spec: SceneSpec, k: Optional[CameraIntrinsics] = None,
                true_scale: float = 1.0) -> Scene:
    k = k or default_intrinsics()
    if not 0.2 <= true_scale <= 5.0:
        raise ValueError("true scale must lie in [0.2, 5]")
    spec = place_occluders(spec, k)
    pts, cols, labels = [], [], []
    for i, ob in enumerate(spec.objects):
        local = shapes.sample_surface(ob.shape, ob.size,
                                      TARGET_SPACING if ob.is_target else OBSTACLE_SPACING)
        pts.append(ob.pose.apply(local))
        cols.append(np.tile(ob.color, (len(local), 1)))
        labels.append(np.full(len(local), i))
    cloud = PointCloud(np.concatenate(pts), BASE, np.concatenate(cols))
    labels = np.concatenate(labels)
    ti = next(i for i, o in enumerate(spec.objects) if o.is_target)
    cam = home_camera_pose(spec.target.pose.translation)
    vis, _ = raycast_visibility(spec.objects, k, cam)
    truth = GroundTruth(spec.target, cloud.subset(labels == ti), true_scale, vis)
    return Scene(spec, cloud, labels, k, cam, truth)


def simulate_capture(scene: Scene, pose: RigidTransform, k: Optional[CameraIntrinsics] = None,
                     view_id: Optional[str] = None,
                     settings: RenderSettings = RenderSettings()) -> Capture:
    """Render the full scene; the target mask doubles as the segmentation output."""
    k = k or scene.intrinsics
    view_id = view_id or pose.src.view
    pose = pose.retag(src=camera(view_id))
    view = splat_render(scene.cloud, k, pose, settings, target=scene.labels == scene.target_index)
    return Capture(view_id, view.color, view.depth, view.target_hits, pose)


class SurrogatePredictor:
    """Up-to-scale multi-view predictor driven by true geometry.

    Translations and points are divided by the hidden scale and perturbed by
    isotropic Gaussian noise (``sigma``, metres; ``depth_noise`` adds a
    depth-proportional term).  The first input frame is the coordinate anchor.
    """

    def __init__(self, scale: float = 1.0, sigma: float = 0.002, rot_sigma_deg: float = 0.3,
                 depth_noise: float = 0.0, seed: int = 0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.scale = scale
        self.sigma = sigma
        self.rot_sigma = math.radians(rot_sigma_deg)
        self.depth_noise = depth_noise
        self.seed = seed
        self.calls = 0

    def _rng(self):
        self.calls += 1
        return np.random.default_rng([self.seed, self.calls])

    def _noisy_relative(self, rel: RigidTransform, view: str, rng) -> RigidTransform:
        rot = rel.rotation
        if self.rot_sigma > 0:
            axis = rng.normal(size=3)
            rot = rotation_about(axis, rng.normal(0.0, self.rot_sigma)) @ rot
        t = rel.translation / self.scale + rng.normal(0.0, self.sigma, 3)
        return RigidTransform(rot, t, camera(view), WORLD_PRED)

    def predict_poses(self, true_poses: Sequence[RigidTransform], views=None, rng=None):
        rng = rng if rng is not None else self._rng()
        views = views or [p.src.view for p in true_poses]
        a_inv = invert(true_poses[0])
        out = [RigidTransform.identity(camera(views[0]), WORLD_PRED)]
        for p, v in zip(true_poses[1:], views[1:]):
            out.append(self._noisy_relative(compose(a_inv, p), v, rng))
        return out

    def predict(self, captures: Sequence[Capture], k: CameraIntrinsics) -> Prediction:
        rng = self._rng()
        true = [c.pose for c in captures]
        poses = self.predict_poses(true, [c.view_id for c in captures], rng)
        a_inv = invert(true[0])
        maps, pix = [], []
        for cap in captures:
            cam_pts = backproject_depth(k, cap.depth)
            ok = np.isfinite(cam_pts[..., 2])
            v, u = np.nonzero(ok)
            local = cam_pts[ok]
            anchor = compose(a_inv, cap.pose).apply(local) / self.scale
            noise = rng.normal(0.0, 1.0, anchor.shape)
            sig = self.sigma + self.depth_noise * local[:, 2:3]
            maps.append(PointCloud(anchor + noise * sig, WORLD_PRED, cap.image[ok]))
            pix.append(np.column_stack([u, v]))
        return Prediction(poses, maps, pix)


class SimWorld:
    """Pipeline-facing view of a scene: capture and predict, nothing else.

    Executed camera poses are logged in :attr:`view_poses` for evaluation.
    """

    def __init__(self, scene: Scene, predictor: SurrogatePredictor,
                 settings: RenderSettings = RenderSettings()):
        self._scene = scene
        self._predictor = predictor
        self._settings = settings
        self.intrinsics = scene.intrinsics
        self.initial_pose = scene.initial_pose
        self.view_poses = {}

    def capture(self, pose: RigidTransform, view_id: str) -> Capture:
        cap = simulate_capture(self._scene, pose, view_id=view_id, settings=self._settings)
        self.view_poses[view_id] = cap.pose
        return cap

    def predict(self, captures: Sequence[Capture]) -> Prediction:
        return self._predictor.predict(captures, self.intrinsics)


# ---- evaluators (ground truth only) ------------------------------------

COVERAGE_TOL = 0.005
SUCCESS_DIST = 0.02
SUCCESS_ANGLE_DEG = 15.0
GRASP_END_MARGIN = 0.015


def target_coverage(extracted: PointCloud, truth: GroundTruth, tol: float = COVERAGE_TOL) -> float:
    """Share of true target surface points with an extracted point within ``tol``."""
    if len(extracted) == 0:
        return 0.0
    d, _ = cKDTree(extracted.points).query(truth.target_cloud.points, distance_upper_bound=tol)
    return float(np.mean(np.isfinite(d)))


def observed_fraction(scene: Scene, poses: Sequence[RigidTransform]) -> float:
    """Share of the true target surface seen by at least one of ``poses``."""
    pts = scene.truth.target_cloud.points
    seen = np.zeros(len(pts), dtype=bool)
    for pose in poses:
        seen |= surface_visible(scene.spec.objects, scene.intrinsics, pose, pts)
    return float(seen.mean())


def grasp_axis_segment(target: SceneObject):
    """Valid grasp centres as a base-frame segment ``(a, b)`` plus the unit
    axis the jaws should straddle (``None`` for orientation-free shapes)."""
    c = target.pose.translation
    axis = shapes.principal_axis(target.shape, target.size)
    if axis is None:
        return c, c, None
    half = max(0.5 * float(np.dot(np.abs(axis), target.size)) - GRASP_END_MARGIN, 0.0)
    u = target.pose.rotation @ axis
    return c - half * u, c + half * u, u


def grasp_success(grasp: RigidTransform, target: SceneObject) -> bool:
    """Grasp centre within 2 cm of the valid segment and the jaw-width axis
    (+y of the end effector) within 15 degrees of the object's long axis."""
    a, b, u = grasp_axis_segment(target)
    p = grasp.translation
    ab = b - a
    t = 0.0 if not ab.any() else float(np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0))
    if np.linalg.norm(p - (a + t * ab)) > SUCCESS_DIST:
        return False
    if u is None:
        return True
    cosang = abs(float(np.dot(grasp.rotation[:, 1], u)))
    return math.degrees(math.acos(min(1.0, cosang))) <= SUCCESS_ANGLE_DEG


def _r(x, nd=6):
    return None if x is None else round(float(x), nd)


@dataclass(eq=False)
class EpisodeReport:
    level: str
    seed: int
    nbv_budget: int
    chosen_nbvs: list
    scale_hat: float
    scale_source: str
    scale_error: float
    view_visibility: dict
    initial_visibility: float
    visibility: float
    coverage: float
    pose_errors: Optional[dict]
    grasp_view: Optional[str]
    rank_used: Optional[int]
    n_grasps: int
    reperceptions: int
    success: bool
    failure: Optional[str]
    scorer_fallbacks: int
    artifacts: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "artifacts"}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_episode(spec: SceneSpec, config=None, true_scale: float = 1.0, sigma: float = 0.002,
                seed: Optional[int] = None, scorer=None, proposer=None, scene: Scene = None
                ) -> EpisodeReport:
    """Build the scene, run the pipeline against it and score the outcome.

    Failures inside the loop end up in ``report.failure``; they are never
    raised.
    """
    config = config or PipelineConfig()
    scene = scene or build_scene(spec, true_scale=true_scale)
    seed = spec.seed if seed is None else seed
    predictor = SurrogatePredictor(true_scale, sigma=sigma, seed=seed)
    world = SimWorld(scene, predictor, config.render)
    try:
        res = Pipeline(world, config, scorer, proposer).run()
    except GraspViewError as exc:
        # e.g. an unreachable remote scorer with fallback disabled
        if isinstance(exc, ScorerUnavailable):
            raise
        res = None
        failure = f"{type(exc).__name__}: {exc}"
    truth = scene.truth
    truth.view_poses = dict(world.view_poses)
    if res is None:
        return EpisodeReport(spec.occlusion_level, seed, config.nbv_budget, [], config.prior_scale,
                             "prior", _r(abs(config.prior_scale / true_scale - 1)), {},
                             _r(truth.initial_visibility), 0.0, 0.0, None, None, None, 0, 0, False,
                             failure, 0)
    rec = res.recon
    vis = {vid: _r(raycast_visibility(scene.spec.objects, scene.intrinsics, pose)[0])
           for vid, pose in truth.view_poses.items()}
    perr = None
    if len(rec.pose_pairs) >= 2:
        perr = {k: _r(v) for k, v in pose_errors(rec.pose_pairs, rec.scale).items()}
    nbvs = [{"view": s.view_id, "ring": s.candidate.ring, "azimuth": s.candidate.azimuth,
             "score": _r(s.candidate.score.combined), "position": [_r(v) for v in s.candidate.position],
             "reperception": s.reperception} for s in res.steps]
    success = res.plan is not None and grasp_success(res.plan.grasp, truth.target)
    return EpisodeReport(
        spec.occlusion_level, seed, config.nbv_budget, nbvs, _r(rec.scale), rec.scale_source,
        _r(abs(rec.scale / true_scale - 1.0)), vis, _r(truth.initial_visibility),
        _r(observed_fraction(scene, list(truth.view_poses.values()))),
        _r(target_coverage(rec.target, truth)), perr, res.grasp_view,
        None if res.plan is None else res.plan.rank_used, res.n_grasps, res.reperceptions,
        bool(success), res.failure, res.scorer_fallbacks, res)


# ---- reference alignment sequence -------------------------------------

REFERENCE_SCALE = 0.85


def reference_camera_poses(n_views: int = 4, seed: int = 0) -> List[RigidTransform]:
    """Fixed arc of wrist poses looking at a point 0.5 m in front of the
    robot; the first pose is the anchor."""
    rng = np.random.default_rng(seed)
    c = np.array([0.5, 0.0, 0.05])
    out = []
    for i in range(n_views):
        az = math.radians(180.0 + 25.0 * i) + rng.normal(0, 0.02)
        el = math.radians(30.0 + 8.0 * i)
        d = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
        p = c + 0.45 * d
        out.append(RigidTransform(look_rotation(c - p), p, camera(f"ref{i}"), BASE))
    return out


def alignment_effect(scale: float = REFERENCE_SCALE, sigma: float = 0.002, seed: int = 0,
                     n_views: int = 4) -> dict:
    """Median pose errors of surrogate predictions on the reference sequence,
    with the recovered scale and with the scale fixed to 1."""
    poses = reference_camera_poses(n_views, seed)
    pred = SurrogatePredictor(scale, sigma=sigma, seed=seed).predict_poses(poses)
    seq = PosePairSequence.from_lists(poses, pred)
    lam = recover_scale(relative_translations(seq))
    return {"scale_hat": lam, "aligned": pose_errors(seq, lam), "unaligned": pose_errors(seq, 1.0)}


@lru_cache(maxsize=1)
def _reference_table() -> dict:
    text = resources.files("graspview").joinpath("data/reference_seeds.json").read_text()
    return json.loads(text)


def reference_seeds(level: str) -> List[int]:
    return list(_reference_table()["levels"][level]["seeds"])
