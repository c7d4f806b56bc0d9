"""Closed perception, view-selection and grasp-planning loop.

The loop only talks to a :class:`World` (camera capture plus an up-to-scale
geometry predictor).  Anything the simulator knows beyond that stays on the
simulator side and is used for evaluation only.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence

import numpy as np

from . import cloud as cp
from .alignment import PosePairSequence, recover_scale, relative_translations, rescale_to_bv
from .errors import AllNoise, DegenerateScale, NeedsReperception, NoFeasibleCandidate
from .geometry import (BASE, END_EFFECTOR, CameraIntrinsics, PointCloud, RigidTransform, camera,
                       compose, invert, transform_points)
from .grasp import (AntipodalProposer, ExecutionPlan, KinematicModel, align_symmetry,
                    grasp_to_base, plan_execution, rank_grasps)
from .renderer import RenderedView, RenderSettings, splat_render
from .sampler import ConeSamplerConfig, ViewCandidate, generate_candidates
from .scoring import HeuristicScorer, ScoreWeights, make_score, select_grasp_view, select_nbv
from .shapes import sample_cylinder

log = logging.getLogger(__name__)

STAGES = ("initial", "after-mask", "after-clip", "after-denoise", "after-cluster", "grasp-view")


@dataclass(eq=False)
class Capture:
    view_id: str
    image: np.ndarray      # (H, W, 3)
    depth: np.ndarray      # (H, W), inf where empty
    mask: np.ndarray       # (H, W) target segmentation
    pose: RigidTransform   # camera -> base, from kinematics


@dataclass(eq=False)
class Prediction:
    poses: List[RigidTransform]        # camera -> predictor world (first input = identity)
    point_maps: List[PointCloud]       # per view, predictor-world frame
    pixels: List[np.ndarray]           # (N, 2) pixel (u, v) of each point


class World(Protocol):
    intrinsics: CameraIntrinsics
    initial_pose: RigidTransform

    def capture(self, pose: RigidTransform, view_id: str) -> Capture: ...

    def predict(self, captures: Sequence[Capture]) -> Prediction: ...


@dataclass
class PipelineConfig:
    nbv_budget: int = 1
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    sampler: ConeSamplerConfig = field(default_factory=ConeSamplerConfig)
    filters: cp.FilterParams = field(default_factory=cp.FilterParams)
    workspace: cp.WorkspaceBounds = field(default_factory=cp.WorkspaceBounds)
    render: RenderSettings = field(default_factory=RenderSettings)
    pregrasp_offset: float = 0.10
    lift_dz: float = 0.15
    max_reperception: int = 1
    prior_scale: float = 1.0
    redundant_radius: float = 0.05     # candidates this close to a captured view are skipped
    proxy_min_radius: float = 0.025
    table_height: float = 0.0
    hand_eye_offset: tuple = (0.0, 0.0, -0.05)   # end-effector origin in camera coordinates
    target_name: str = "target object"
    score_workers: int = 1
    keep_renders: bool = False

    def __post_init__(self):
        if not 0 <= int(self.nbv_budget) <= 10:
            raise ValueError("nbv_budget must lie in [0, 10]")
        if not self.pregrasp_offset > 0:
            raise ValueError("pre-grasp offset must be positive")
        if int(self.max_reperception) < 0:
            raise ValueError("max_reperception must be >= 0")
        if not self.prior_scale > 0:
            raise ValueError("prior_scale must be positive")


@dataclass(eq=False)
class TraversedView:
    view_id: str
    pose: RigidTransform
    ring: int = 0
    azimuth: int = 0


@dataclass(eq=False)
class Reconstruction:
    bv: str                         # anchor view id
    order: List[str]                # predictor input order
    scale: float
    scale_source: str               # "aligned" or "prior"
    pose_pairs: PosePairSequence
    cloud: PointCloud               # all reconstructed points, base frame
    stages: Dict[str, PointCloud]
    target_index: np.ndarray        # indices into ``cloud``
    failure: Optional[str] = None

    @property
    def target(self) -> PointCloud:
        return self.cloud.subset(self.target_index)


@dataclass(eq=False)
class NBVStep:
    step: int
    view_id: str
    candidate: ViewCandidate
    n_candidates: int
    n_feasible: int
    reperception: bool = False


@dataclass(eq=False)
class PipelineResult:
    captures: List[Capture]
    steps: List[NBVStep]
    recon: Reconstruction
    grasp_view: Optional[str] = None
    plan: Optional[ExecutionPlan] = None
    n_grasps: int = 0
    reperceptions: int = 0
    failure: Optional[str] = None
    scorer_fallbacks: int = 0
    renders: Dict[str, RenderedView] = field(default_factory=dict)
    stage_clouds: Dict[str, PointCloud] = field(default_factory=dict)


def amodal_proxy(fragment: PointCloud, table_height: float, min_radius: float,
                 spacing: float = 0.003) -> PointCloud:
    """Column standing in for the unseen part of the target: from the table
    up to the top of the observed fragment, centred under its centroid."""
    c = fragment.centroid()
    horiz = np.linalg.norm(fragment.points[:, :2] - c[:2], axis=1)
    r = max(min_radius, float(np.percentile(horiz, 90)))
    top = float(np.percentile(fragment.points[:, 2], 95))
    h = max(top - table_height, spacing)
    local = sample_cylinder((2 * r, 2 * r, h), spacing)
    return PointCloud(local + [c[0], c[1], table_height + h / 2], BASE)


class Pipeline:
    def __init__(self, world: World, config: PipelineConfig = None, scorer=None,
                 proposer=None, kinematics: KinematicModel = None):
        self.world = world
        self.cfg = config or PipelineConfig()
        self.scorer = scorer or HeuristicScorer()
        self.proposer = proposer or AntipodalProposer()
        self.kin = kinematics or KinematicModel(table_height=self.cfg.table_height)
        self.k = world.intrinsics

    # -- reconstruction ---------------------------------------------------
    def reconstruct(self, captures: Sequence[Capture], bv_index: int) -> Reconstruction:
        """Predict with the BV first, recover scale, fuse and extract the target."""
        order = [bv_index] + [i for i in range(len(captures)) if i != bv_index]
        caps = [captures[i] for i in order]
        pred = self.world.predict(caps)
        seq = PosePairSequence.from_lists([c.pose for c in caps], pred.poses)
        lam, source = self.cfg.prior_scale, "prior"
        if len(caps) >= 2:
            try:
                lam, source = recover_scale(relative_translations(seq)), "aligned"
            except DegenerateScale as exc:
                log.warning("scale recovery failed (%s); using prior", exc)
        t_w_bv = invert(pred.poses[0])
        maps = [transform_points(caps[0].pose, rescale_to_bv(pm, lam, t_w_bv))
                for pm in pred.point_maps]
        scene = PointCloud.concat(maps)
        rec = Reconstruction(caps[0].view_id, [c.view_id for c in caps], lam, source, seq, scene,
                             {"initial": scene}, np.zeros(0, dtype=np.int64))
        t_cb = [invert(c.pose) for c in caps]
        obj, idx = cp.fuse_masks_select(scene, caps[0].mask, [c.mask for c in caps[1:]], self.k,
                                        t_cb[0], t_cb[1:], return_index=True)
        rec.stages["after-mask"] = obj
        obj, i2 = cp.clip_workspace(obj, self.cfg.workspace, return_index=True)
        idx = idx[i2]
        rec.stages["after-clip"] = obj
        obj, i2 = cp.denoise(obj, self.cfg.filters, return_index=True)
        idx = idx[i2]
        rec.stages["after-denoise"] = obj
        try:
            obj, i2 = cp.largest_cluster(obj, self.cfg.filters, return_index=True)
        except AllNoise as exc:
            rec.failure = f"target extraction: {exc}"
            return rec
        rec.target_index = idx[i2]
        rec.stages["after-cluster"] = obj
        return rec

    # -- view scoring -----------------------------------------------------
    def _score_views(self, scene: PointCloud, is_target: np.ndarray, poses: Sequence[RigidTransform]):
        target_only = scene.subset(is_target)

        def one(pose):
            view = splat_render(scene, self.k, pose, self.cfg.render, target=is_target)
            mask = np.isfinite(splat_render(target_only, self.k, pose, self.cfg.render).depth)
            return view, self.scorer.score(view, mask, self.cfg.target_name)

        if self.cfg.score_workers > 1 and getattr(self.scorer, "concurrent_safe", False):
            with ThreadPoolExecutor(self.cfg.score_workers) as ex:
                return list(ex.map(one, poses))
        return [one(p) for p in poses]

    def nbv_step(self, step: int, current: RigidTransform, rec: Reconstruction,
                 visited: Sequence[RigidTransform], renders: dict) -> tuple:
        """Render-and-score the cone candidates; returns ``(chosen, n_feasible)``."""
        target = rec.target
        centroid = target.centroid()
        proxy = amodal_proxy(target, self.cfg.table_height, self.cfg.proxy_min_radius)
        scene = PointCloud.concat([PointCloud(rec.cloud.points, BASE), proxy])
        is_target = np.zeros(len(scene), dtype=bool)
        is_target[rec.target_index] = True
        is_target[len(rec.cloud):] = True

        def feasible(pose):
            if not self.kin.camera_feasible(pose):
                return False
            return all(np.linalg.norm(pose.translation - v.translation) > self.cfg.redundant_radius
                       for v in visited)

        cands = generate_candidates(self.cfg.sampler, current, centroid, feasible)
        pool = [c for c in cands if c.feasible]
        scored = self._score_views(scene, is_target, [c.pose for c in pool])
        for c, (view, comps) in zip(pool, scored):
            c.score = make_score(self.cfg.weights, comps,
                                 getattr(self.scorer, "name", "heuristic"))
            if self.cfg.keep_renders:
                renders[f"step{step}-{c.view_id}"] = view
        return select_nbv(cands), len(pool)

    # -- grasping ---------------------------------------------------------
    def wrist_pose(self, t_bc: RigidTransform) -> RigidTransform:
        t_ce = RigidTransform(np.eye(3), self.cfg.hand_eye_offset, END_EFFECTOR, t_bc.src)
        return compose(t_bc, t_ce)

    def grasp_stage(self, views: Sequence[TraversedView], rec: Reconstruction, current: RigidTransform,
                    result: PipelineResult) -> ExecutionPlan:
        is_target = np.zeros(len(rec.cloud), dtype=bool)
        is_target[rec.target_index] = True
        scored = self._score_views(rec.cloud, is_target, [v.pose for v in views])
        chosen = select_grasp_view(list(views), [comps for _, comps in scored], self.cfg.weights.w_o)
        result.grasp_view = chosen.view_id
        if self.cfg.keep_renders:
            result.renders["grasp-view"] = scored[list(views).index(chosen)][0]
        t_bc = chosen.pose
        local = transform_points(invert(t_bc), rec.target)
        result.stage_clouds["grasp-view"] = local
        grasps = self.proposer.propose(local)
        result.n_grasps = len(grasps)
        if not grasps:
            raise NeedsReperception([(-1, "no grasp proposals")])
        ranked = rank_grasps(grasps, t_bc)
        wrist = self.wrist_pose(current)
        poses = [align_symmetry(grasp_to_base(g, t_bc), wrist) for g in ranked]
        return plan_execution(poses, self.cfg.pregrasp_offset, rec.cloud, self.kin,
                              widths=[g.width for g in ranked], lift_dz=self.cfg.lift_dz)

    # -- episode ----------------------------------------------------------
    def run(self) -> PipelineResult:
        cfg = self.cfg
        captures = [self.world.capture(self.world.initial_pose.retag(src=camera("v0")), "v0")]
        views = [TraversedView("v0", captures[0].pose)]
        rec = self.reconstruct(captures, 0)
        result = PipelineResult(captures, [], rec)

        def explore(step, reperception=False):
            nonlocal rec
            cand, n_ok = self.nbv_step(step, captures[-1].pose, rec, [c.pose for c in captures],
                                 result.renders)
            vid = f"nbv{len(captures)}"
            pose = cand.pose.retag(src=camera(vid))
            captures.append(self.world.capture(pose, vid))
            views.append(TraversedView(vid, pose, cand.ring, cand.azimuth))
            result.steps.append(NBVStep(step, vid, cand, cfg.sampler.count, n_ok, reperception))
            rec = self.reconstruct(captures, len(captures) - 1)
            result.recon = rec

        try:
            if rec.failure is None:
                for step in range(cfg.nbv_budget):
                    explore(step)
                    if rec.failure is not None:
                        break
            while rec.failure is None:
                try:
                    result.plan = self.grasp_stage(views, rec, captures[-1].pose, result)
                    break
                except NeedsReperception as exc:
                    if result.reperceptions >= cfg.max_reperception:
                        result.failure = f"needs reperception: {exc.reasons[:3]}"
                        break
                    result.reperceptions += 1
                    explore(len(result.steps), reperception=True)
        except NoFeasibleCandidate as exc:
            result.failure = f"no feasible view: {exc}"
        if rec.failure is not None and result.failure is None:
            result.failure = rec.failure
        result.stage_clouds = {**rec.stages, **result.stage_clouds}
        result.scorer_fallbacks = int(getattr(self.scorer, "fallbacks", 0))
        return result
