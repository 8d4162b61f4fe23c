"""Forward kinematics, point Jacobians, and trajectory differentiation.

Conventions: a joint's transform maps child-frame coordinates to the
parent-side joint frame.  For a free joint with parameters [phi, d] the
child origin sits at (joint frame) position d and the child axes are
exp([phi]x); the translation is applied in the joint frame, so the
rotational DOFs pivot the body about its own origin.

World rotation axes of a joint's rotational DOFs are the columns of
R_wJ J_l(phi) (left Jacobian), which is what makes parameter rates and
angular velocities consistent: omega_rel = R_wJ J_l(phi) phidot.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, TooShortError, UnknownBodyError
from .rotations import exp_so3, left_jacobian, lift_near, skew, wrap_to_ball


@dataclass
class FrameKinematics:
    """World transforms from one forward-kinematics pass."""

    link_rot: np.ndarray    # L x 3 x 3
    link_pos: np.ndarray    # L x 3, child-frame origins
    joint_rot: np.ndarray   # L x 3 x 3, R_wJ per joint (same index as child link)
    joint_pos: np.ndarray   # L x 3, joint-frame origins


def forward_kinematics(tree, q):
    """World transform of every link; returns a FrameKinematics."""
    q = tree.check_config(q)
    L = len(tree.links)
    link_rot = np.empty((L, 3, 3))
    link_pos = np.empty((L, 3))
    joint_rot = np.empty((L, 3, 3))
    joint_pos = np.empty((L, 3))
    for i, joint in enumerate(tree.joints):
        p = tree.parent_index[i]
        if p < 0:
            R_p, o_p = np.eye(3), np.zeros(3)
        else:
            R_p, o_p = link_rot[p], link_pos[p]
        R_wj = R_p @ joint.origin_rotation
        o_j = o_p + R_p @ joint.origin_translation
        start, stop = tree.q_slices[i]
        qj = q[start:stop]
        if joint.kind == "free":
            R_j = exp_so3(qj[:3])
            t_j = qj[3:]
        elif joint.kind == "spherical":
            R_j = exp_so3(qj)
            t_j = np.zeros(3)
        else:  # revolute
            R_j = exp_so3(joint.axis * qj[0])
            t_j = np.zeros(3)
        c = tree.child_index[i]
        joint_rot[c] = R_wj
        joint_pos[c] = o_j
        link_rot[c] = R_wj @ R_j
        link_pos[c] = o_j + R_wj @ t_j
    return FrameKinematics(link_rot, link_pos, joint_rot, joint_pos)


def point_position(tree, q, body, offset):
    """World position of a body-frame point."""
    idx = tree.link_id(body)
    fk = forward_kinematics(tree, q)
    return fk.link_rot[idx] @ np.asarray(offset, dtype=float) + fk.link_pos[idx]


def _path_joints(tree, link_idx):
    """Joint indices from the root down to the given link."""
    path = []
    i = link_idx
    while i >= 0:
        path.append(i)
        i = tree.parent_index[i]
    path.reverse()
    return path


def point_jacobian_fk(tree, q, fk, link_idx, offset):
    """3 x n Jacobian of a body point, reusing a forward-kinematics pass."""
    p = fk.link_rot[link_idx] @ np.asarray(offset, dtype=float) + fk.link_pos[link_idx]
    J = np.zeros((3, tree.dof))
    for ji in _path_joints(tree, link_idx):
        joint = tree.joints[ji]
        start, _ = tree.q_slices[ji]
        R_wj = fk.joint_rot[ji]
        pivot = fk.link_pos[tree.child_index[ji]]
        r = p - pivot
        if joint.kind == "revolute":
            w = R_wj @ joint.axis
            J[:, start] = np.cross(w, r)
        else:
            qrot = q[start:start + 3]
            W = R_wj @ left_jacobian(qrot)       # world rotation axes
            J[:, start:start + 3] = np.cross(W.T, r).T
            if joint.kind == "free":
                J[:, start + 3:start + 6] = R_wj
    return J


def point_jacobian(tree, q, body, offset):
    """3 x n matrix J with pdot = J qdot for the world point of `body` + offset.

    Columns of DOFs off the root-to-body path are zero.
    """
    q = tree.check_config(q)
    idx = tree.link_id(body)
    fk = forward_kinematics(tree, q)
    return point_jacobian_fk(tree, q, fk, idx, offset)


def angular_jacobian_fk(tree, q, fk, link_idx):
    """3 x n map from qdot to the link's world angular velocity."""
    J = np.zeros((3, tree.dof))
    for ji in _path_joints(tree, link_idx):
        joint = tree.joints[ji]
        start, _ = tree.q_slices[ji]
        R_wj = fk.joint_rot[ji]
        if joint.kind == "revolute":
            J[:, start] = R_wj @ joint.axis
        else:
            J[:, start:start + 3] = R_wj @ left_jacobian(q[start:start + 3])
    return J


@dataclass
class Trajectory:
    """Time-stamped configuration sequence with derived velocities.

    `q` is T x n; `qd`/`qdd` are filled in by `differentiate`.
    """

    dt: float
    q: np.ndarray
    qd: np.ndarray = None
    qdd: np.ndarray = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.dt <= 0.0:
            raise DimensionError("trajectory dt must be positive")
        if self.q.ndim != 2:
            raise DimensionError("trajectory frames must be a T x n array")

    @property
    def num_frames(self):
        return self.q.shape[0]


@dataclass(frozen=True)
class ContactPoint:
    body: str
    offset: np.ndarray
    role: str  # 'scene' | 'object'

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))
        if self.role not in ("scene", "object"):
            raise DimensionError(f"contact point role must be scene|object, got {self.role!r}")


@dataclass(frozen=True)
class ContactPointSet:
    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def scene_points(self):
        return [p for p in self.points if p.role == "scene"]

    @property
    def object_points(self):
        return [p for p in self.points if p.role == "object"]

    def validate(self, tree):
        for p in self.points:
            tree.link_id(p.body)


def _unwrap_rotation_blocks(tree, q):
    """Re-wrap axis-angle triples into the pi ball, then lift each frame
    next to its predecessor so differencing never crosses a wrap."""
    q = q.copy()
    for start in tree.rotation_triples():
        block = q[:, start:start + 3]
        block[0] = wrap_to_ball(block[0])
        for t in range(1, block.shape[0]):
            block[t] = lift_near(wrap_to_ball(block[t]), block[t - 1])
        q[:, start:start + 3] = block
    return q


def differentiate(traj, tree=None):
    """Populate qd and qdd with second-order finite differences.

    Interior frames use central differences; endpoints use one-sided
    second-order stencils (first-order for qdd when only 3 frames exist).
    When `tree` is given, axis-angle blocks are continuously lifted first.
    """
    T = traj.num_frames
    if T < 3:
        raise TooShortError(f"need at least 3 frames, got {T}")
    q = traj.q if tree is None else _unwrap_rotation_blocks(tree, traj.q)
    dt = traj.dt
    qd = np.empty_like(q)
    qdd = np.empty_like(q)

    qd[1:-1] = (q[2:] - q[:-2]) / (2.0 * dt)
    qd[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * dt)
    qd[-1] = (3.0 * q[-1] - 4.0 * q[-2] + q[-3]) / (2.0 * dt)

    qdd[1:-1] = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / (dt * dt)
    if T >= 4:
        qdd[0] = (2.0 * q[0] - 5.0 * q[1] + 4.0 * q[2] - q[3]) / (dt * dt)
        qdd[-1] = (2.0 * q[-1] - 5.0 * q[-2] + 4.0 * q[-3] - q[-4]) / (dt * dt)
    else:
        qdd[0] = qdd[1]
        qdd[-1] = qdd[1]

    return Trajectory(dt=dt, q=q, qd=qd, qdd=qdd)


def differentiate_series(values, dt):
    """Same stencils applied to an arbitrary T x ... series (used for
    contact-point positions and object poses)."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 3:
        raise TooShortError(f"need at least 3 frames, got {v.shape[0]}")
    d = np.empty_like(v)
    dd = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * dt)
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
    d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dt)
    dd[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dt * dt)
    if v.shape[0] >= 4:
        dd[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (dt * dt)
        dd[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (dt * dt)
    else:
        dd[0] = dd[1]
        dd[-1] = dd[1]
    return d, dd
