import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graspview.errors import FrameMismatch, NeedsReperception
from graspview.geometry import (BASE, END_EFFECTOR, PointCloud, RigidTransform, camera, compose,
                                geodesic_angle, rotation_about)
from graspview.grasp import (AntipodalProposer, GraspCandidate, KinematicModel, align_symmetry,
                             grasp_reply, grasp_to_base, parse_grasp_reply, plan_execution,
                             rank_grasps, symmetry_orbit, topdown_key)
from oracles import mat4, random_rotation

CAM = camera("g")


def rt(r, t, src, dst):
    return RigidTransform(np.asarray(r, float), np.asarray(t, float), src, dst)


def cand(r=np.eye(3), t=(0, 0, 0), score=1.0, width=0.04):
    return GraspCandidate(rt(r, t, END_EFFECTOR, CAM), width, score)


def test_to_base_examples():
    g = cand(rotation_about([1, 0, 0], 0.3), (0.1, 0.2, 0.3))
    out = grasp_to_base(g, RigidTransform.identity(CAM, BASE))
    assert out.src == END_EFFECTOR and out.dst == BASE
    assert np.array_equal(out.rotation, g.pose.rotation) and np.array_equal(out.translation, g.pose.translation)
    out = grasp_to_base(cand(), rt(np.eye(3), (0, 0, 0.5), CAM, BASE))
    assert np.array_equal(out.translation, [0, 0, 0.5])
    with pytest.raises(FrameMismatch):
        grasp_to_base(cand(), RigidTransform.identity(camera("other"), BASE))


def test_to_base_matrix_oracle(rng):
    worst = 0.0
    for _ in range(1000):
        g = cand(random_rotation(rng), rng.normal(size=3))
        t = rt(random_rotation(rng), rng.normal(size=3), CAM, BASE)
        out = grasp_to_base(g, t)
        m = mat4(t.rotation, t.translation) @ mat4(g.pose.rotation, g.pose.translation)
        worst = max(worst, np.max(np.abs(mat4(out.rotation, out.translation) - m)))
    assert worst <= 1e-12


@given(st.integers(0, 2 ** 32 - 1))
def test_to_base_distributes(seed):
    rng = np.random.default_rng(seed)
    mid = camera("mid")
    g = cand(random_rotation(rng), rng.normal(size=3))
    a = rt(random_rotation(rng), rng.normal(size=3), mid, BASE)
    b = rt(random_rotation(rng), rng.normal(size=3), CAM, mid)
    lhs = grasp_to_base(g, compose(a, b))
    rhs = compose(a, grasp_to_base(g, b))
    assert np.max(np.abs(lhs.rotation - rhs.rotation)) <= 1e-9
    assert np.max(np.abs(lhs.translation - rhs.translation)) <= 1e-9


def ee(r, t=(0.4, 0, 0.2)):
    return rt(r, t, END_EFFECTOR, BASE)


def test_symmetry_examples(rng):
    r = random_rotation(rng)
    t_be = ee(r)
    assert align_symmetry(t_be, t_be) is t_be
    flipped = ee(r @ rotation_about([0, 0, 1], math.pi))
    out = align_symmetry(t_be, flipped)
    assert geodesic_angle(out.rotation, flipped.rotation) < 1e-6
    wrist = ee(r @ rotation_about([0, 0, 1], math.radians(91)))
    out = align_symmetry(t_be, wrist)
    d_keep = math.degrees(geodesic_angle(r, wrist.rotation))
    d_out = math.degrees(geodesic_angle(out.rotation, wrist.rotation))
    assert d_keep == pytest.approx(91, abs=1e-6) and d_out == pytest.approx(89, abs=1e-6)
    # exact tie (90 deg) keeps the input
    assert align_symmetry(t_be, ee(r @ rotation_about([0, 0, 1], math.pi / 2))) is t_be


@given(st.integers(0, 2 ** 32 - 1))
def test_symmetry_never_worse(seed):
    rng = np.random.default_rng(seed)
    t_be, wrist = ee(random_rotation(rng)), ee(random_rotation(rng))
    out = align_symmetry(t_be, wrist)
    orbit = symmetry_orbit(t_be)
    assert any(np.allclose(out.rotation, o.rotation, atol=1e-12) for o in orbit)
    assert np.array_equal(out.translation, t_be.translation)
    assert geodesic_angle(out.rotation, wrist.rotation) <= geodesic_angle(t_be.rotation, wrist.rotation)


# camera frame whose +z points down in the base
T_DOWN = rt(rotation_about([1, 0, 0], math.pi), (0.4, 0, 0.6), CAM, BASE)
HORIZ = rotation_about([0, 1, 0], math.pi / 2)   # approach along camera +x


def test_rank_examples():
    down, side = cand(score=0.5), cand(HORIZ, score=0.5)
    assert rank_grasps([side, down], T_DOWN) == [down, side]
    assert rank_grasps([side], T_DOWN) == [side]
    side9, down5 = cand(HORIZ, score=0.9), cand(score=0.5)
    assert rank_grasps([side9, down5], T_DOWN) == [down5, side9]
    # stable on equal keys
    a, b = cand(score=0.3), cand(score=0.3)
    assert rank_grasps([a, b], T_DOWN) == [a, b]


@given(st.lists(st.floats(0.01, 1), min_size=1, max_size=10), st.floats(1e-2, 1e2),
       st.integers(0, 2 ** 32 - 1))
def test_rank_scale_invariant(scores, s, seed):
    rng = np.random.default_rng(seed)
    rots = [random_rotation(rng) for _ in scores]
    gs = [cand(r, score=v) for r, v in zip(rots, scores)]
    hs = [cand(r, score=v * s) for r, v in zip(rots, scores)]
    order_a = [gs.index(g) for g in rank_grasps(gs, T_DOWN)]
    order_b = [hs.index(g) for g in rank_grasps(hs, T_DOWN)]
    # keys equal up to rounding may swap, so compare the keys in rank order
    va = [topdown_key(gs[i], T_DOWN) for i in order_a]
    vb = [topdown_key(gs[i], T_DOWN) for i in order_b]
    assert np.allclose(va, vb, rtol=1e-12, atol=0)


def top_down_be(t):
    return ee(rotation_about([1, 0, 0], math.pi), t)


def test_plan_first_and_offsets():
    kin = KinematicModel()
    g = top_down_be((0.45, 0.0, 0.05))
    plan = plan_execution([g], 0.10, PointCloud(np.zeros((0, 3)), BASE), kin)
    assert plan.rank_used == 0
    assert abs(np.linalg.norm(plan.pre_grasp.translation - g.translation) - 0.10) <= 1e-9
    disp = plan.pre_grasp.translation - g.translation
    assert np.allclose(disp / np.linalg.norm(disp), -g.rotation[:, 2], atol=1e-12)
    assert np.allclose(plan.lift.translation - g.translation, [0, 0, 0.15], atol=1e-15)
    assert np.array_equal(plan.lift.rotation, g.rotation)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 0.3))
def test_plan_geometry_property(seed, d):
    rng = np.random.default_rng(seed)
    g = ee(random_rotation(rng), rng.uniform([-0.3, -0.3, 0.35], [0.3, 0.3, 0.5]))
    plan = plan_execution([g], d, PointCloud(np.zeros((0, 3)), BASE), KinematicModel())
    disp = plan.pre_grasp.translation - g.translation
    assert abs(np.linalg.norm(disp) - d) <= 1e-9
    assert np.allclose(disp, -d * g.rotation[:, 2], atol=1e-12)


def test_plan_fallback_and_exhaustion():
    kin = KinematicModel()
    # a block of points right where the first grasp's jaws close
    g0 = top_down_be((0.45, 0.0, 0.05))
    g1 = top_down_be((0.45, 0.3, 0.05))
    jaw = np.array([[0.45 + 0.04 + 0.01 * i, 0.0, 0.05 + 0.005 * j] for i in range(2) for j in range(2)])
    cloud = PointCloud(jaw, BASE)
    assert kin.collides(g0, cloud, 0.04)
    plan = plan_execution([g0, g1], 0.10, cloud, kin, widths=[0.04, 0.04])
    assert plan.rank_used == 1 and plan.width == 0.04
    far = top_down_be((2.0, 0.0, 0.1))
    under = top_down_be((0.3, 0.0, -0.2))
    with pytest.raises(NeedsReperception) as ei:
        plan_execution([far, under], 0.10, cloud, kin)
    assert [r for r, _ in ei.value.reasons] == [0, 1]
    with pytest.raises(NeedsReperception):
        plan_execution([], 0.10, cloud, kin)
    with pytest.raises(ValueError):
        plan_execution([g0], 0.0, cloud, kin)


def test_collision_needs_min_points():
    kin = KinematicModel()
    g = top_down_be((0.45, 0.0, 0.05))
    two = PointCloud(np.array([[0.45 + 0.04, 0, 0.05], [0.45 + 0.045, 0, 0.05]]), BASE)
    assert not kin.collides(g, two, 0.04)
    with pytest.raises(FrameMismatch):
        kin.collides(g, PointCloud(two.points, CAM), 0.04)


def box_cloud(rng, size=(0.12, 0.04, 0.03), n=1500, centre=(0, 0, 0.5)):
    pts = rng.uniform(-0.5, 0.5, (n, 3)) * size + centre
    return PointCloud(pts, CAM)


def test_proposer_camera_frame_only(rng):
    with pytest.raises(FrameMismatch):
        AntipodalProposer().propose(PointCloud(box_cloud(rng).points, BASE))
    assert AntipodalProposer().propose(PointCloud(np.zeros((2, 3)), CAM)) == []


def test_proposer_antipodal_box(rng):
    cloud = box_cloud(rng)
    gs = AntipodalProposer().propose(cloud)
    assert gs
    for g in gs:
        r = g.pose.rotation
        # jaws close perpendicular to the long (x) axis, which the grasp y follows
        assert abs(r[:, 0] @ [1, 0, 0]) < 0.05
        assert abs(r[:, 1] @ [1, 0, 0]) > 0.99
        assert 0.0 <= g.proposer_score <= 1.0
        assert g.width <= 0.0505
        assert abs(g.pose.translation[0]) < 0.005
    assert AntipodalProposer().propose(cloud)[0].pose.translation.tolist() == gs[0].pose.translation.tolist()


def test_grasp_wire_roundtrip(rng):
    gs = AntipodalProposer().propose(box_cloud(rng))
    back = parse_grasp_reply(grasp_reply(gs), CAM)
    assert len(back) == len(gs)
    for a, b in zip(gs, back):
        assert np.allclose(a.pose.rotation, b.pose.rotation, atol=1e-12)
        assert np.allclose(a.pose.translation, b.pose.translation, atol=1e-12)
        assert a.width == pytest.approx(b.width) and a.proposer_score == pytest.approx(b.proposer_score)
