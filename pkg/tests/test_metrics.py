import numpy as np
import pytest

from contactdyn.errors import DimensionError
from contactdyn.kinematics import Trajectory
from contactdyn.metrics import (MetricReport, collision_percentage,
                                contact_prf, evaluate, foot_sliding,
                                point_errors, pose_errors, prf_from_labels,
                                scene_penetration)
from contactdyn.rotations import exp_so3
from contactdyn.surfaces import (BoxShape, PlaneShape, Surface,
                                 TrajectoryAttachment)
from conftest import humanoid_tree, single_box_tree


def static_traj(tree, T=5, z=1.0):
    q = np.zeros((T, tree.dof))
    q[:, 5] = z
    return Trajectory(dt=0.1, q=q)


def test_identical_trajectories_zero_errors():
    tree = humanoid_tree(4)
    traj = static_traj(tree)
    hand_jpe, mpjpe, t_root, o_root = pose_errors(traj, traj, tree)
    assert mpjpe == 0.0 and t_root == 0.0 and o_root == 0.0


def test_rigid_offset_three_centimeters():
    tree = humanoid_tree(4)
    gt = static_traj(tree)
    pred = Trajectory(dt=0.1, q=gt.q.copy())
    pred.q[:, 3] += 0.03
    hand_jpe, mpjpe, t_root, o_root = pose_errors(pred, gt, tree)
    assert abs(t_root - 3.0) < 1e-12
    assert abs(mpjpe - 3.0) < 1e-12
    assert o_root < 1e-12


def test_root_rotation_ninety_degrees():
    """|R90 - I|_F = 2 exactly."""
    tree = single_box_tree()
    gt = static_traj(tree)
    pred = Trajectory(dt=0.1, q=gt.q.copy())
    pred.q[:, 2] = np.pi / 2    # rotate about z
    _, _, _, o_root = pose_errors(pred, gt, tree)
    assert abs(o_root - 2.0) < 1e-12


def test_hand_links_follow_naming():
    from contactdyn.model import box_inertia, build_tree

    tree = build_tree({
        "links": [
            {"name": "root", "mass": 1.0, "inertia": box_inertia(1, (0.1,) * 3).tolist()},
            {"name": "left_hand", "mass": 0.2,
             "inertia": box_inertia(0.2, (0.03,) * 3).tolist()},
        ],
        "joints": [
            {"kind": "free", "parent": "world", "child": "root"},
            {"kind": "spherical", "parent": "root", "child": "left_hand",
             "origin": {"translation": [0.0, 0.0, 0.5]}},
        ],
    })
    gt = Trajectory(dt=0.1, q=np.zeros((4, tree.dof)))
    pred = Trajectory(dt=0.1, q=gt.q.copy())
    pred.q[:, 6:9] = (0.0, 0.4, 0.0)   # only the hand joint differs
    hand_jpe, mpjpe, t_root, _ = pose_errors(pred, gt, tree)
    assert hand_jpe == 0.0             # joint origins coincide; offsets rotate
    assert t_root == 0.0


def test_point_errors_proxy():
    tree = single_box_tree()
    gt = static_traj(tree)
    pred = Trajectory(dt=0.1, q=gt.q.copy())
    pred.q[:, 4] += 0.02
    err = point_errors(pred, gt, tree, [("box", (0.1, 0.0, 0.0))])
    assert abs(err - 2.0) < 1e-12


def test_mismatched_frames_rejected():
    tree = single_box_tree()
    with pytest.raises(DimensionError):
        pose_errors(static_traj(tree, T=4), static_traj(tree, T=5), tree)


def object_box_surface(T, z=0.0):
    poses = np.zeros((T, 6))
    poses[:, 5] = z
    return Surface(BoxShape((0.5, 0.5, 0.5)), TrajectoryAttachment(poses, 0.1))


def test_collision_percentage_constructed():
    """One frame of ten with a point 5 cm inside at a 4 cm threshold."""
    tree = single_box_tree()
    T = 10
    q = np.zeros((T, 6))
    q[:, 5] = 1.0          # sample point well outside the unit box
    q[3, 5] = 0.45         # frame 3: point 5 cm inside the top face
    traj = Trajectory(dt=0.1, q=q)
    surface = object_box_surface(T)
    pct = collision_percentage(traj, tree, [("box", (0, 0, 0))], surface, 0.04)
    assert abs(pct - 10.0) < 1e-12


def test_collision_boundary_not_counted():
    tree = single_box_tree()
    T = 5
    q = np.zeros((T, 6))
    q[:, 5] = 0.46          # exactly -0.04 signed distance
    traj = Trajectory(dt=0.1, q=q)
    pct = collision_percentage(traj, tree, [("box", (0, 0, 0))],
                               object_box_surface(T), 0.04)
    assert pct == 0.0


def test_collision_monotone_in_threshold():
    tree = single_box_tree()
    T = 8
    q = np.zeros((T, 6))
    q[:, 5] = np.linspace(0.3, 1.0, T)
    traj = Trajectory(dt=0.1, q=q)
    surface = object_box_surface(T)
    points = [("box", (0, 0, 0))]
    pcts = [collision_percentage(traj, tree, points, surface, th)
            for th in (0.0, 0.02, 0.05, 0.1)]
    assert all(a >= b for a, b in zip(pcts, pcts[1:]))


def test_prf_confusion_matrix_case():
    pred = np.array([[1], [1], [0], [0]], dtype=bool)
    gt = np.array([[1], [0], [1], [0]], dtype=bool)
    prec, rec, f1 = prf_from_labels(pred, gt)
    assert (prec, rec, f1) == (0.5, 0.5, 0.5)


def test_prf_conventions():
    none = np.zeros((4, 1), dtype=bool)
    some = np.array([[1], [0], [1], [0]], dtype=bool)
    prec, rec, f1 = prf_from_labels(none, some)
    assert prec == 1.0 and rec == 0.0 and f1 == 0.0
    prec, rec, f1 = prf_from_labels(some, none)
    assert rec == 1.0
    prec, rec, f1 = prf_from_labels(none, none)
    assert (prec, rec, f1) == (1.0, 1.0, 1.0)


def test_contact_prf_identical_is_perfect():
    tree = single_box_tree()
    T = 6
    q = np.zeros((T, 6))
    q[:, 5] = 0.52
    traj = Trajectory(dt=0.1, q=q)
    surface = object_box_surface(T)
    prec, rec, f1 = contact_prf(traj, traj, tree, [("box", (0, 0, 0))], surface)
    assert (prec, rec, f1) == (1.0, 1.0, 1.0)


def test_contact_prf_total_miss():
    tree = single_box_tree()
    T = 6
    q_gt = np.zeros((T, 6))
    q_gt[:3, 5] = 0.52      # in contact half the frames (within 5 cm)
    q_gt[3:, 5] = 2.0
    q_pred = np.full((T, 6), 0.0)
    q_pred[:, 5] = 2.0      # never in contact
    prec, rec, f1 = contact_prf(Trajectory(dt=0.1, q=q_pred),
                                Trajectory(dt=0.1, q=q_gt), tree,
                                [("box", (0, 0, 0))], object_box_surface(T))
    assert rec == 0.0 and f1 == 0.0


def test_foot_sliding_cases():
    tree = single_box_tree()
    T = 6
    # Stationary feet.
    q = np.zeros((T, 6))
    assert foot_sliding(Trajectory(dt=0.1, q=q), tree, [("box", (0, 0, 0))]) == 0.0
    # Foot at ground level moving 1 cm per frame: weight 2 - 2^0 = 1.
    q2 = np.zeros((T, 6))
    q2[:, 3] = np.arange(T) * 0.01
    fs = foot_sliding(Trajectory(dt=0.1, q=q2), tree, [("box", (0, 0, 0))],
                      ground_height=0.0, height_threshold=0.05)
    assert abs(fs - 1.0) < 1e-12
    # Foot above the height threshold contributes nothing.
    q3 = q2.copy()
    q3[:, 5] = 0.2
    assert foot_sliding(Trajectory(dt=0.1, q=q3), tree, [("box", (0, 0, 0))]) == 0.0


def test_scene_penetration_constructed():
    tree = single_box_tree()
    T = 30
    q = np.zeros((T, 6))
    q[:, 5] = 1.0
    q[5:8, 5] = -0.08      # 3 of 30 frames deeper than 4 cm below the floor
    traj = Trajectory(dt=0.1, q=q)
    floor = Surface(PlaneShape((0, 0, 0), (0, 0, 1)))
    pct = scene_penetration(traj, tree, [("box", (0, 0, 0))], [floor], 0.04)
    assert abs(pct - 10.0) < 1e-12
    # Motion above the floor: zero.
    q_up = np.zeros((T, 6))
    q_up[:, 5] = 0.5
    assert scene_penetration(Trajectory(dt=0.1, q=q_up), tree,
                             [("box", (0, 0, 0))], [floor], 0.04) == 0.0
    # Threshold 0 counts any interior sample.
    q_in = np.zeros((T, 6))
    q_in[:, 5] = -1e-6
    assert scene_penetration(Trajectory(dt=0.1, q=q_in), tree,
                             [("box", (0, 0, 0))], [floor], 0.0) == 100.0


def test_rigid_invariance():
    """Applying one rigid transform to pred, gt, and scene leaves every
    metric unchanged."""
    tree = humanoid_tree(3)
    rng = np.random.default_rng(5)
    T = 6
    gt_q = rng.normal(size=(T, tree.dof)) * 0.2
    pred_q = gt_q + rng.normal(size=(T, tree.dof)) * 0.05
    gt = Trajectory(dt=0.1, q=gt_q)
    pred = Trajectory(dt=0.1, q=pred_q)
    base = pose_errors(pred, gt, tree, hand_links=["seg2"])

    # Shift both by the same world translation (root translation DOFs).
    shift = np.array([0.7, -0.3, 0.4])
    gt2 = Trajectory(dt=0.1, q=gt_q.copy())
    pred2 = Trajectory(dt=0.1, q=pred_q.copy())
    gt2.q[:, 3:6] += shift
    pred2.q[:, 3:6] += shift
    moved = pose_errors(pred2, gt2, tree, hand_links=["seg2"])
    assert np.allclose(base, moved, atol=1e-9)


def test_report_formats():
    report = MetricReport(mpjpe=1.25, f1=0.5)
    text = report.to_text()
    assert "mpjpe = 1.25" in text
    csv = report.to_csv()
    assert csv.splitlines()[0].startswith("hand_jpe,mpjpe")
    assert len(csv.splitlines()) == 2


def test_evaluate_fills_available_fields():
    tree = single_box_tree()
    T = 5
    traj = static_traj(tree, T=T, z=0.6)
    surface = object_box_surface(T)
    report = evaluate(traj, traj, tree,
                      body_points=[("box", (0, 0, 0))],
                      hand_points=[("box", (0, 0, -0.05))],
                      foot_points=[("box", (0, 0, -0.05))],
                      object_surface=surface,
                      scene_surfaces=[Surface(PlaneShape((0, 0, 0), (0, 0, 1)))])
    assert report.mpjpe == 0.0
    assert report.f1 == 1.0
    assert report.scene_pen == 0.0
    assert report.fs == 0.0
