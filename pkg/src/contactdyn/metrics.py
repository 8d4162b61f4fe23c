"""Physical-plausibility metrics over predicted vs. ground-truth motion.

Position errors are reported in centimeters, collision and scene
penetration as the percentage of offending frames, contact agreement as
precision/recall/F1 of binary per-frame labels, and foot sliding as
height-weighted horizontal drift.  All metrics are invariant under a
common rigid transform of prediction, ground truth, and scene.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, MissingPoseError
from .kinematics import forward_kinematics

M_TO_CM = 100.0

COLLISION_THRESHOLD = 0.04   # m
CONTACT_THRESHOLD = 0.05     # m
FOOT_HEIGHT = 0.05           # m


@dataclass
class MetricReport:
    hand_jpe: float = float("nan")   # cm
    mpjpe: float = float("nan")      # cm
    mpvpe: float = float("nan")      # cm, body sample-point proxy
    t_root: float = float("nan")     # cm
    o_root: float = float("nan")     # Frobenius deviation, dimensionless
    collision_pct: float = float("nan")
    fs: float = float("nan")         # cm per frame
    c_prec: float = float("nan")
    c_rec: float = float("nan")
    f1: float = float("nan")
    scene_pen: float = float("nan")  # %

    FIELDS = ("hand_jpe", "mpjpe", "mpvpe", "t_root", "o_root",
              "collision_pct", "fs", "c_prec", "c_rec", "f1", "scene_pen")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.FIELDS}

    def to_text(self):
        return "".join(f"{k} = {float(getattr(self, k))!r}\n" for k in self.FIELDS)

    def to_csv(self):
        header = ",".join(self.FIELDS)
        row = ",".join(repr(float(getattr(self, k))) for k in self.FIELDS)
        return header + "\n" + row + "\n"


def _check_aligned(pred, gt):
    if pred.q.shape != gt.q.shape:
        raise DimensionError(
            f"trajectories must align, got {pred.q.shape} vs {gt.q.shape}")


def _link_positions(tree, traj):
    T = traj.num_frames
    L = len(tree.links)
    pos = np.empty((T, L, 3))
    rot = np.empty((T, L, 3, 3))
    for t in range(T):
        fk = forward_kinematics(tree, traj.q[t])
        pos[t] = fk.link_pos
        rot[t] = fk.link_rot
    return pos, rot


def pose_errors(pred, gt, tree, hand_links=None):
    """(hand_jpe, mpjpe, t_root, o_root).

    Joint positions are the link-frame origins.  `hand_links` defaults to
    every link whose name contains 'hand'; hand_jpe is NaN when none match.
    Root orientation error is the mean Frobenius norm of
    R_pred R_gt^T - I.
    """
    _check_aligned(pred, gt)
    p_pos, p_rot = _link_positions(tree, pred)
    g_pos, g_rot = _link_positions(tree, gt)

    err = np.linalg.norm(p_pos - g_pos, axis=2) * M_TO_CM   # T x L
    mpjpe = float(err.mean())

    if hand_links is None:
        hand_links = [l.name for l in tree.links if "hand" in l.name.lower()]
    if hand_links:
        idx = [tree.link_id(name) for name in hand_links]
        hand_jpe = float(err[:, idx].mean())
    else:
        hand_jpe = float("nan")

    t_root = float(np.linalg.norm(p_pos[:, 0] - g_pos[:, 0], axis=1).mean() * M_TO_CM)
    dev = p_rot[:, 0] @ np.swapaxes(g_rot[:, 0], 1, 2) - np.eye(3)
    o_root = float(np.linalg.norm(dev, axis=(1, 2)).mean())
    return hand_jpe, mpjpe, t_root, o_root


def point_errors(pred, gt, tree, sample_points):
    """Mean position error of body sample points, cm (per-vertex proxy)."""
    _check_aligned(pred, gt)
    T = pred.num_frames
    total = 0.0
    for t in range(T):
        fkp = forward_kinematics(tree, pred.q[t])
        fkg = forward_kinematics(tree, gt.q[t])
        for body, offset in sample_points:
            li = tree.link_id(body)
            pp = fkp.link_rot[li] @ np.asarray(offset, float) + fkp.link_pos[li]
            pg = fkg.link_rot[li] @ np.asarray(offset, float) + fkg.link_pos[li]
            total += float(np.linalg.norm(pp - pg))
    return total / (T * max(len(sample_points), 1)) * M_TO_CM


def _sample_distances(traj, tree, sample_points, surface, t):
    fk = forward_kinematics(tree, traj.q[t])
    out = []
    for body, offset in sample_points:
        li = tree.link_id(body)
        p = fk.link_rot[li] @ np.asarray(offset, float) + fk.link_pos[li]
        out.append(surface.nearest(p, t).signed_distance)
    return out


def collision_percentage(traj, tree, sample_points, object_surface, threshold=COLLISION_THRESHOLD):
    """Percentage of frames where any sample point penetrates the object
    deeper than `threshold` (strictly)."""
    if object_surface.is_dynamic:
        poses = getattr(object_surface.attachment, "poses", None)
        if poses is not None and poses.shape[0] < traj.num_frames:
            raise MissingPoseError("object poses cover fewer frames than the trajectory")
    T = traj.num_frames
    bad = 0
    for t in range(T):
        d = _sample_distances(traj, tree, sample_points, object_surface, t)
        if any(di < -threshold for di in d):
            bad += 1
    return 100.0 * bad / T


def contact_labels(traj, tree, hand_points, object_surface, threshold=CONTACT_THRESHOLD):
    """T x H boolean matrix: hand point within `threshold` of the surface."""
    T = traj.num_frames
    labels = np.zeros((T, len(hand_points)), dtype=bool)
    for t in range(T):
        d = _sample_distances(traj, tree, hand_points, object_surface, t)
        labels[t] = [di < threshold for di in d]
    return labels


def contact_prf(pred, gt, tree, hand_points, object_surface, threshold=CONTACT_THRESHOLD):
    """(precision, recall, F1) of predicted contact labels against ground
    truth.  Conventions: precision is 1 with no predicted positives,
    recall is 1 with no ground-truth positives, F1 is 0 when both
    precision and recall are 0.
    """
    _check_aligned(pred, gt)
    lp = contact_labels(pred, tree, hand_points, object_surface, threshold)
    lg = contact_labels(gt, tree, hand_points, object_surface, threshold)
    return prf_from_labels(lp, lg)


def prf_from_labels(pred_labels, gt_labels):
    pred_labels = np.asarray(pred_labels, dtype=bool)
    gt_labels = np.asarray(gt_labels, dtype=bool)
    if pred_labels.shape != gt_labels.shape:
        raise DimensionError("label arrays must align")
    tp = int((pred_labels & gt_labels).sum())
    fp = int((pred_labels & ~gt_labels).sum())
    fn = int((~pred_labels & gt_labels).sum())
    prec = 1.0 if tp + fp == 0 else tp / (tp + fp)
    rec = 1.0 if tp + fn == 0 else tp / (tp + fn)
    f1 = 0.0 if prec + rec == 0.0 else 2.0 * prec * rec / (prec + rec)
    return prec, rec, f1


def foot_sliding(traj, tree, foot_points, ground_height=0.0, height_threshold=FOOT_HEIGHT):
    """Height-weighted horizontal drift of foot points, cm per frame.

    Each frame-to-frame displacement of a foot point below the height
    threshold H contributes ||dp_xy|| * (2 - 2^(h/H)); the weight is 1 at
    ground level and fades to 0 at H.
    """
    T = traj.num_frames
    if T < 2 or not foot_points:
        return 0.0
    pos = np.empty((T, len(foot_points), 3))
    for t in range(T):
        fk = forward_kinematics(tree, traj.q[t])
        for i, (body, offset) in enumerate(foot_points):
            li = tree.link_id(body)
            pos[t, i] = fk.link_rot[li] @ np.asarray(offset, float) + fk.link_pos[li]
    total = 0.0
    for t in range(1, T):
        for i in range(len(foot_points)):
            h = pos[t, i, 2] - ground_height
            if h < height_threshold:
                dxy = np.linalg.norm(pos[t, i, :2] - pos[t - 1, i, :2]) * M_TO_CM
                total += dxy * (2.0 - 2.0 ** (h / height_threshold))
    return float(total / (T - 1))


def scene_penetration(traj, tree, sample_points, scene_surfaces, threshold=COLLISION_THRESHOLD):
    """Percentage of frames where any sample point sits deeper than
    `threshold` inside any static scene surface (strict inequality)."""
    T = traj.num_frames
    bad = 0
    for t in range(T):
        hit = False
        for surface in scene_surfaces:
            d = _sample_distances(traj, tree, sample_points, surface, t)
            if any(di < -threshold for di in d):
                hit = True
                break
        if hit:
            bad += 1
    return 100.0 * bad / T


def evaluate(pred, gt, tree, hand_links=None, body_points=(), hand_points=(),
             foot_points=(), object_surface=None, scene_surfaces=(),
             collision_threshold=COLLISION_THRESHOLD,
             contact_threshold=CONTACT_THRESHOLD,
             ground_height=0.0, foot_height=FOOT_HEIGHT):
    """Full MetricReport; fields without the needed inputs stay NaN."""
    hand_jpe, mpjpe, t_root, o_root = pose_errors(pred, gt, tree, hand_links)
    report = MetricReport(hand_jpe=hand_jpe, mpjpe=mpjpe, t_root=t_root,
                          o_root=o_root)
    if body_points:
        report.mpvpe = point_errors(pred, gt, tree, body_points)
    if object_surface is not None and body_points:
        report.collision_pct = collision_percentage(
            pred, tree, body_points, object_surface, collision_threshold)
    if object_surface is not None and hand_points:
        report.c_prec, report.c_rec, report.f1 = contact_prf(
            pred, gt, tree, hand_points, object_surface, contact_threshold)
    if foot_points:
        report.fs = foot_sliding(pred, tree, foot_points, ground_height, foot_height)
    if scene_surfaces and body_points:
        report.scene_pen = scene_penetration(
            pred, tree, body_points, scene_surfaces, collision_threshold)
    return report
