"""Rigid-body dynamics: inverse dynamics, mass matrix, and the coupled
body/object equation-of-motion residuals.

Inverse dynamics is a recursive Newton-Euler pass written in world frame;
the mass matrix is assembled by composite-rigid-body aggregation.  The two
share only forward kinematics, so agreement between `M qdd + C + G` and
`inverse_dynamics` is a genuine cross-check.

Generalized velocities are parameter rates (time derivatives of axis-angle
coordinates); the conversion to angular velocity goes through the SO(3)
left Jacobian and its time derivative (see rotations.py).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .kinematics import forward_kinematics, point_jacobian_fk
from .rotations import exp_so3, left_jacobian, left_jacobian_dot, skew

GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass
class DynamicsTerms:
    """Mass matrix and bias/gravity vectors at one state."""

    M: np.ndarray
    C: np.ndarray
    G: np.ndarray


def _check_state(tree, q, qd, qdd=None):
    q = tree.check_config(q, "q")
    qd = tree.check_config(qd, "qdot")
    if qdd is not None:
        qdd = tree.check_config(qdd, "qddot")
    return q, qd, qdd


def inverse_dynamics(tree, q, qd, qdd, gravity=GRAVITY):
    """Generalized forces M qdd + C + G via recursive Newton-Euler.

    Gravity enters through a fictitious base acceleration of -g, the
    standard trick that folds the gravity load into the same recursion.
    """
    q, qd, qdd = _check_state(tree, q, qd, qdd)
    gravity = np.asarray(gravity, dtype=float)
    if not np.all(np.isfinite(gravity)):
        raise DimensionError("gravity must be finite")

    L = len(tree.links)
    R = np.empty((L, 3, 3))
    o = np.empty((L, 3))
    w = np.empty((L, 3))       # angular velocity
    wd = np.empty((L, 3))      # angular acceleration
    v = np.empty((L, 3))       # velocity of the frame origin
    a = np.empty((L, 3))       # acceleration of the frame origin
    Rwj = np.empty((L, 3, 3))

    for i, joint in enumerate(tree.joints):
        p = tree.parent_index[i]
        if p < 0:
            R_p, o_p = np.eye(3), np.zeros(3)
            w_p, wd_p = np.zeros(3), np.zeros(3)
            v_p, a_p = np.zeros(3), -gravity
        else:
            R_p, o_p, w_p, wd_p, v_p, a_p = R[p], o[p], w[p], wd[p], v[p], a[p]
        R_wj = R_p @ joint.origin_rotation
        o_j = o_p + R_p @ joint.origin_translation
        start, stop = tree.q_slices[i]
        qj, qdj, qddj = q[start:stop], qd[start:stop], qdd[start:stop]

        if joint.kind == "revolute":
            R_j = exp_so3(joint.axis * qj[0])
            t_j = np.zeros(3)
            axis_w = R_wj @ joint.axis
            w_rel = axis_w * qdj[0]
            wd_rel = axis_w * qddj[0]
            v_trans = np.zeros(3)
            a_trans = np.zeros(3)
        else:
            phi, phid = qj[:3], qdj[:3]
            R_j = exp_so3(phi)
            Jl = left_jacobian(phi)
            Jld = left_jacobian_dot(phi, phid)
            w_rel = R_wj @ (Jl @ phid)
            wd_rel = R_wj @ (Jld @ phid + Jl @ qddj[:3])
            if joint.kind == "free":
                t_j = qj[3:]
                v_trans = R_wj @ qdj[3:]
                a_trans = R_wj @ qddj[3:]
            else:
                t_j = np.zeros(3)
                v_trans = np.zeros(3)
                a_trans = np.zeros(3)

        c = tree.child_index[i]
        Rwj[c] = R_wj
        R[c] = R_wj @ R_j
        o[c] = o_j + R_wj @ t_j
        rel = o[c] - o_p
        w[c] = w_p + w_rel
        wd[c] = wd_p + np.cross(w_p, w_rel) + wd_rel
        v[c] = v_p + np.cross(w_p, rel) + v_trans
        a[c] = (a_p + np.cross(wd_p, rel) + np.cross(w_p, np.cross(w_p, rel))
                + 2.0 * np.cross(w_p, v_trans) + a_trans)

    # Newton-Euler wrench of each body about its own frame origin.
    F = np.empty((L, 3))
    N = np.empty((L, 3))
    for c, link in enumerate(tree.links):
        rc = R[c] @ link.com_offset
        a_com = a[c] + np.cross(wd[c], rc) + np.cross(w[c], np.cross(w[c], rc))
        I_w = R[c] @ link.inertia @ R[c].T
        F[c] = link.mass * a_com
        N[c] = I_w @ wd[c] + np.cross(w[c], I_w @ w[c]) + np.cross(rc, F[c])

    # Accumulate child wrenches up the tree (children have larger indices).
    f_acc = F.copy()
    n_acc = N.copy()
    for i in range(len(tree.joints) - 1, -1, -1):
        p = tree.parent_index[i]
        if p < 0:
            continue
        c = tree.child_index[i]
        f_acc[p] += f_acc[c]
        n_acc[p] += n_acc[c] + np.cross(o[c] - o[p], f_acc[c])

    tau = np.zeros(tree.dof)
    for i, joint in enumerate(tree.joints):
        start, stop = tree.q_slices[i]
        c = tree.child_index[i]
        if joint.kind == "revolute":
            tau[start] = (Rwj[c] @ joint.axis) @ n_acc[c]
        else:
            W = Rwj[c] @ left_jacobian(q[start:start + 3])
            tau[start:start + 3] = W.T @ n_acc[c]
            if joint.kind == "free":
                tau[start + 3:start + 6] = Rwj[c].T @ f_acc[c]
    return tau


def mass_matrix(tree, q):
    """Joint-space mass matrix by composite-rigid-body aggregation."""
    q = tree.check_config(q)
    fk = forward_kinematics(tree, q)
    L = len(tree.links)

    # Spatial inertia of each body about the world origin, [omega; v] order.
    I6 = np.empty((L, 6, 6))
    for c, link in enumerate(tree.links):
        com = fk.link_pos[c] + fk.link_rot[c] @ link.com_offset
        I_w = fk.link_rot[c] @ link.inertia @ fk.link_rot[c].T
        S = skew(com)
        m = link.mass
        I6[c, :3, :3] = I_w - m * (S @ S)
        I6[c, :3, 3:] = m * S
        I6[c, 3:, :3] = -m * S
        I6[c, 3:, 3:] = m * np.eye(3)

    composite = I6.copy()
    for i in range(len(tree.joints) - 1, -1, -1):
        p = tree.parent_index[i]
        if p >= 0:
            composite[p] += composite[tree.child_index[i]]

    def joint_axes(i):
        """6 x dof spatial axes about the world origin."""
        joint = tree.joints[i]
        c = tree.child_index[i]
        R_wj = fk.joint_rot[c]
        pivot = fk.link_pos[c]
        if joint.kind == "revolute":
            wax = (R_wj @ joint.axis).reshape(3, 1)
        else:
            start, _ = tree.q_slices[i]
            wax = R_wj @ left_jacobian(q[start:start + 3])
        U = np.zeros((6, joint.dof))
        U[:3, :wax.shape[1]] = wax
        U[3:, :wax.shape[1]] = np.cross(pivot, wax.T).T
        if joint.kind == "free":
            U[3:, 3:] = R_wj
        return U

    # Joint i's child link has index i, so joint and link indices coincide.
    axes = [joint_axes(i) for i in range(len(tree.joints))]
    M = np.zeros((tree.dof, tree.dof))
    for i in range(len(tree.joints)):
        si, ei = tree.q_slices[i]
        Fi = composite[tree.child_index[i]] @ axes[i]
        M[si:ei, si:ei] = axes[i].T @ Fi
        k = tree.parent_index[i]
        while k >= 0:
            sk, ek = tree.q_slices[k]
            block = axes[k].T @ Fi
            M[sk:ek, si:ei] = block
            M[si:ei, sk:ek] = block.T
            k = tree.parent_index[k]
    return 0.5 * (M + M.T)


def bias_and_gravity(tree, q, qd, gravity=GRAVITY):
    """(C, G): Coriolis/centrifugal bias and gravity load."""
    zero = np.zeros(tree.dof)
    C = inverse_dynamics(tree, q, qd, zero, gravity=np.zeros(3))
    G = inverse_dynamics(tree, q, zero, zero, gravity=gravity)
    return C, G


def dynamics_terms(tree, q, qd, gravity=GRAVITY):
    C, G = bias_and_gravity(tree, q, qd, gravity)
    return DynamicsTerms(M=mass_matrix(tree, q), C=C, G=G)


def human_residual(tree, q, qd, qdd, tau, scene_contacts=(), object_contacts=(),
                   gravity=GRAVITY):
    """Euler-Lagrange residual of the articulated body at one frame.

    r = M qdd + C + G - tau - sum J_s^T lam_s - sum J_o^T lam_o.
    Contacts are (J, lam) pairs with J the 3 x n point Jacobian and lam the
    world force applied to the body at that point.
    """
    tau = tree.check_config(tau, "tau")
    r = inverse_dynamics(tree, q, qd, qdd, gravity) - tau
    for J, lam in list(scene_contacts) + list(object_contacts):
        J = np.asarray(J, dtype=float)
        if J.shape != (3, tree.dof):
            raise DimensionError(f"contact Jacobian must be 3 x {tree.dof}")
        r -= J.T @ np.asarray(lam, dtype=float)
    return r


def object_residual(obj_tree, q_o, qd_o, qdd_o, hand_contacts=(), gravity=GRAVITY):
    """Residual of the free object's equations of motion.

    The object side of Newton's third law: the same lam vectors that enter
    `human_residual` with a plus sign enter here through +J_o^T lam (the
    reaction force on the object is -lam, moved to the left-hand side).
    """
    r = inverse_dynamics(obj_tree, q_o, qd_o, qdd_o, gravity)
    for J, lam in hand_contacts:
        J = np.asarray(J, dtype=float)
        if J.shape != (3, 6):
            raise DimensionError("object contact Jacobian must be 3 x 6")
        r += J.T @ np.asarray(lam, dtype=float)
    return r


@dataclass
class ResidualReport:
    """Per-frame Euler-Lagrange residuals and their L1 aggregate."""

    r_h: np.ndarray            # T x n
    r_o: np.ndarray            # T x 6, zeros when there is no object
    frame_norms_h: np.ndarray
    frame_norms_o: np.ndarray

    @property
    def frame_norms(self):
        return self.frame_norms_h + self.frame_norms_o

    @property
    def aggregate(self):
        return float(self.frame_norms.sum())


def coupled_residual(tree, obj_tree, human_frames, object_frames, tau,
                     scene_forces, object_forces, scene_jacobians,
                     object_jacobians_human, object_jacobians_object,
                     gravity=GRAVITY):
    """Evaluate human and object residuals over a trajectory.

    `human_frames` / `object_frames` are (q, qd, qdd) arrays of shape T x n
    and T x 6.  Forces are T x C x 3 arrays produced once by the contact
    model; each object force enters the human side as +lam through the human
    Jacobian and the object side with the Eq.-of-motion sign convention
    applied internally.
    """
    q, qd, qdd = human_frames
    T = q.shape[0]
    r_h = np.zeros((T, tree.dof))
    r_o = np.zeros((T, 6))
    for t in range(T):
        sc = []
        if scene_forces is not None:
            sc = [(scene_jacobians[t][i], scene_forces[t, i])
                  for i in range(scene_forces.shape[1])]
        oc = []
        if object_forces is not None:
            oc = [(object_jacobians_human[t][i], object_forces[t, i])
                  for i in range(object_forces.shape[1])]
        r_h[t] = human_residual(tree, q[t], qd[t], qdd[t], tau[t],
                                scene_contacts=sc, object_contacts=oc,
                                gravity=gravity)
        if obj_tree is not None and object_frames is not None:
            qo, qdo, qddo = object_frames
            ho = [(object_jacobians_object[t][i], object_forces[t, i])
                  for i in range(object_forces.shape[1])]
            r_o[t] = object_residual(obj_tree, qo[t], qdo[t], qddo[t],
                                     hand_contacts=ho, gravity=gravity)
    return ResidualReport(
        r_h=r_h,
        r_o=r_o,
        frame_norms_h=np.abs(r_h).sum(axis=1),
        frame_norms_o=np.abs(r_o).sum(axis=1),
    )
