"""Recovery of joint torques and contact coefficients from motion.

Given observed body and object trajectories, scene geometry, and candidate
contact points, minimize the coupled equation-of-motion residuals over the
torque trajectory tau and the per-point per-frame coefficient tensors A
(scene contacts) and B (object contacts):

    sum_t  huber(r_h(t)) + huber(r_o(t))
         + w_tau ||tau_t||^2 + w_coef ||(A_t, B_t)||^2

Coefficients are parameterized as squares of free variables, which keeps
them nonnegative by construction.  With trajectory derivatives fixed, the
frames decouple, so each frame is an independent smooth subproblem solved
by limited-memory BFGS with a backtracking (Armijo) line search; accepted
steps never increase the objective and the whole run is deterministic.

The force model enters only through `contact.ContactAffineForm`, the same
primitive the direct evaluator uses, and the analytic gradients are
checked against central finite differences by `gradient_check`.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import contact as cm
from .dynamics import GRAVITY, ResidualReport, inverse_dynamics
from .errors import DegenerateProblem, DimensionError
from .kinematics import (Trajectory, differentiate, differentiate_series,
                         forward_kinematics, point_jacobian_fk)
from .surfaces import Surface, TrajectoryAttachment, nearest_among


@dataclass
class SolveProblem:
    """Inputs of one recovery run; trajectories share T and dt."""

    tree: object
    human_traj: Trajectory
    surfaces: list
    contact_points: object            # ContactPointSet
    config: cm.ContactModelConfig
    obj: object = None                # RigidObjectModel
    object_traj: Trajectory = None    # T x 6 poses
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    w_tau: float = 1e-4
    w_coef: float = 1e-10
    huber_delta: float = 0.1
    actuation_mask: np.ndarray = None  # bool per DOF, True = actuated
    max_iters: int = 400
    grad_tol: float = 1e-9
    fd_step: float = 1e-5
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.contact_points.validate(self.tree)
        if self.object_traj is not None:
            if self.object_traj.num_frames != self.human_traj.num_frames:
                raise DimensionError("human and object trajectories must share T")
            if abs(self.object_traj.dt - self.human_traj.dt) > 1e-15:
                raise DimensionError("human and object trajectories must share dt")
        if self.actuation_mask is None:
            self.actuation_mask = np.ones(self.tree.dof, dtype=bool)
        else:
            self.actuation_mask = np.asarray(self.actuation_mask, dtype=bool)
            if self.actuation_mask.shape != (self.tree.dof,):
                raise DimensionError("actuation mask length must equal tree dof")


@dataclass
class FrameContext:
    b_h: np.ndarray
    scene_J: list
    scene_forms: list
    b_o: np.ndarray
    obj_J_h: list
    obj_J_o: list
    obj_forms: list


@dataclass
class ProblemContext:
    problem: SolveProblem
    human: Trajectory          # with qd, qdd
    object: Trajectory         # or None
    frames: list
    c_s: int
    c_o: int


def build_context(problem):
    """Precompute everything that does not depend on (tau, A, B)."""
    tree = problem.tree
    human = differentiate(problem.human_traj, tree=tree)
    T = human.num_frames
    scene_pts = problem.contact_points.scene_points
    object_pts = problem.contact_points.object_points

    obj_tree = None
    obj_traj = None
    obj_surface = None
    if problem.obj is not None and problem.object_traj is not None:
        obj_tree = problem.obj.as_tree()
        obj_traj = differentiate(problem.object_traj, tree=obj_tree)
        obj_surface = Surface(problem.obj.geometry,
                              TrajectoryAttachment(obj_traj.q, obj_traj.dt))

    fks = [forward_kinematics(tree, human.q[t]) for t in range(T)]

    def point_series(cp):
        li = tree.link_id(cp.body)
        p = np.array([fks[t].link_rot[li] @ cp.offset + fks[t].link_pos[li]
                      for t in range(T)])
        J = [point_jacobian_fk(tree, human.q[t], fks[t], li, cp.offset)
             for t in range(T)]
        return p, J

    scene_data = [point_series(cp) for cp in scene_pts]
    object_data = [point_series(cp) for cp in object_pts]
    # Point accelerations for the static-friction direction come from the
    # same finite-difference stencils as the trajectory derivatives.
    scene_acc = [differentiate_series(p, human.dt)[1] for p, _ in scene_data]

    frames = []
    for t in range(T):
        b_h = inverse_dynamics(tree, human.q[t], human.qd[t], human.qdd[t],
                               problem.gravity)
        scene_J, scene_forms = [], []
        for i, (p, J) in enumerate(scene_data):
            pdot = J[t] @ human.qd[t]
            query = nearest_among(problem.surfaces, p[t])
            state = cm.ContactPointState(p[t], pdot, query, pddot=scene_acc[i][t])
            scene_J.append(J[t])
            scene_forms.append(cm.contact_force_affine(
                state, problem.config, cm.STATIC_SCENE, problem.gravity))

        b_o = np.zeros(6)
        obj_J_h, obj_J_o, obj_forms = [], [], []
        if obj_tree is not None:
            b_o = inverse_dynamics(obj_tree, obj_traj.q[t], obj_traj.qd[t],
                                   obj_traj.qdd[t], problem.gravity)
            fko = forward_kinematics(obj_tree, obj_traj.q[t])
            pose = obj_surface.attachment.pose(t)
            a_obj = obj_traj.qdd[t, 3:]
            for (p, J) in object_data:
                pdot = J[t] @ human.qd[t]
                query = obj_surface.nearest(p[t], t)
                state = cm.ContactPointState(p[t], pdot, query,
                                             object_acceleration=a_obj)
                obj_J_h.append(J[t])
                x_local = pose.invert_point(query.x)
                obj_J_o.append(point_jacobian_fk(obj_tree, obj_traj.q[t], fko,
                                                 0, x_local))
                obj_forms.append(cm.contact_force_affine(
                    state, problem.config, cm.MOVING_OBJECT, problem.gravity))

        frames.append(FrameContext(b_h, scene_J, scene_forms, b_o,
                                   obj_J_h, obj_J_o, obj_forms))

    ctx = ProblemContext(problem=problem, human=human, object=obj_traj,
                         frames=frames, c_s=len(scene_pts), c_o=len(object_pts))
    _check_degenerate(ctx)
    return ctx


def _check_degenerate(ctx):
    """Object motion with every contact gate shut cannot be explained."""
    if ctx.object is None:
        return
    max_gate = max((f.gate for fr in ctx.frames for f in fr.obj_forms),
                   default=0.0)
    scale = max(ctx.problem.obj.mass * 9.81, 1e-9)
    worst = max(float(np.abs(fr.b_o).sum()) for fr in ctx.frames)
    if max_gate < 1e-9 and worst > 0.01 * scale:
        raise DegenerateProblem(
            f"no contact gate opens (max {max_gate:.2e}) but the object "
            f"equations leave |r_o| up to {worst:.3g}; torques cannot act "
            "on a free object")


def _huber(r, delta):
    a = np.abs(r)
    return np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta)).sum()


def _huber_grad(r, delta):
    return np.clip(r, -delta, delta)


# Square roots of the natural magnitudes of (kappa, delta, rho, mu), so a
# stiffness of a few kN/m and a friction coefficient below one both map to
# O(1) free variables: coefficient = (u * scale)^2.
COEFF_SCALES = np.array([1e2, 3e1, 3e1, 1.0])


class _FrameObjective:
    """Smooth objective of one frame in the free variables
    z = [tau_actuated, u_A, u_B] with A = (u_A * scale)^2, B likewise."""

    def __init__(self, ctx, t):
        p = ctx.problem
        self.fr = ctx.frames[t]
        self.act = np.nonzero(p.actuation_mask)[0]
        self.n = p.tree.dof
        self.c_s = ctx.c_s
        self.c_o = ctx.c_o if ctx.object is not None else len(self.fr.obj_forms)
        self.has_obj = ctx.object is not None
        self.w_tau = p.w_tau
        self.w_coef = p.w_coef
        self.delta = p.huber_delta
        self.size = len(self.act) + 4 * self.c_s + 4 * self.c_o

    def unpack(self, z):
        """z -> (tau full, u_A, u_B); coefficients are (u * scale)^2."""
        na = len(self.act)
        tau = np.zeros(self.n)
        tau[self.act] = z[:na]
        u_a = z[na:na + 4 * self.c_s].reshape(self.c_s, 4)
        u_b = z[na + 4 * self.c_s:].reshape(self.c_o, 4)
        return tau, u_a, u_b

    def coefficients(self, u):
        return (u * COEFF_SCALES) ** 2

    def pack(self, tau, A, B):
        """Free-variable vector reproducing the given coefficients."""
        u_a = np.sqrt(np.asarray(A, float)) / COEFF_SCALES
        u_b = np.sqrt(np.asarray(B, float)) / COEFF_SCALES
        return np.concatenate([
            np.asarray(tau, float)[self.act],
            u_a.ravel(),
            u_b.ravel(),
        ])

    def residuals(self, z):
        tau, u_a, u_b = self.unpack(z)
        A = self.coefficients(u_a)
        B = self.coefficients(u_b)
        lam_s = [self.fr.scene_forms[i].force(*A[i]) for i in range(self.c_s)]
        lam_o = [self.fr.obj_forms[j].force(*B[j]) for j in range(self.c_o)]
        r_h = self.fr.b_h - tau
        for i in range(self.c_s):
            r_h = r_h - self.fr.scene_J[i].T @ lam_s[i]
        for j in range(self.c_o):
            r_h = r_h - self.fr.obj_J_h[j].T @ lam_o[j]
        r_o = self.fr.b_o.copy()
        for j in range(self.c_o):
            r_o = r_o + self.fr.obj_J_o[j].T @ lam_o[j]
        return r_h, r_o, tau, A, B

    def value(self, z):
        r_h, r_o, tau, A, B = self.residuals(z)
        f = _huber(r_h, self.delta)
        if self.has_obj:
            f += _huber(r_o, self.delta)
        f += self.w_tau * float(tau @ tau)
        f += self.w_coef * (float((A * A).sum()) + float((B * B).sum()))
        return float(f)

    def value_and_grad(self, z):
        tau, u_a, u_b = self.unpack(z)
        A = self.coefficients(u_a)
        B = self.coefficients(u_b)
        r_h, r_o, _, _, _ = self.residuals(z)

        f = _huber(r_h, self.delta) + self.w_tau * float(tau @ tau)
        f += self.w_coef * (float((A * A).sum()) + float((B * B).sum()))
        gh = _huber_grad(r_h, self.delta)
        go = np.zeros(6)
        if self.has_obj:
            f += _huber(r_o, self.delta)
            go = _huber_grad(r_o, self.delta)

        g = np.zeros_like(z)
        na = len(self.act)
        g[:na] = -gh[self.act] + 2.0 * self.w_tau * tau[self.act]

        scale2 = COEFF_SCALES * COEFF_SCALES
        for i in range(self.c_s):
            dlam = -self.fr.scene_J[i] @ gh
            Jc = self.fr.scene_forms[i].force_jacobian(*A[i])
            gc = Jc.T @ dlam + 2.0 * self.w_coef * A[i]
            g[na + 4 * i:na + 4 * i + 4] = 2.0 * u_a[i] * scale2 * gc
        base = na + 4 * self.c_s
        for j in range(self.c_o):
            dlam = -self.fr.obj_J_h[j] @ gh
            if self.has_obj:
                dlam = dlam + self.fr.obj_J_o[j] @ go
            Jc = self.fr.obj_forms[j].force_jacobian(*B[j])
            gc = Jc.T @ dlam + 2.0 * self.w_coef * B[j]
            g[base + 4 * j:base + 4 * j + 4] = 2.0 * u_b[j] * scale2 * gc
        return float(f), g

    def initial_point(self):
        # tau from unforced inverse dynamics, free variables at sqrt(small).
        na = len(self.act)
        z0 = np.empty(self.size)
        z0[:na] = self.fr.b_h[self.act]
        z0[na:] = 1e-2
        return z0


def _lbfgs(objective, z0, max_iters, grad_tol, memory=10):
    """L-BFGS with Armijo backtracking; returns (z, history, converged).

    Accepted steps are monotone by construction.
    """
    z = z0.copy()
    f, g = objective.value_and_grad(z)
    history = [f]
    s_list, y_list = [], []
    converged = bool(np.abs(g).max() <= grad_tol)
    it = 0
    while not converged and it < max_iters:
        quasi = np.abs(g).max()
        d = -g
        if s_list:
            alpha = []
            qv = g.copy()
            for s, y in zip(reversed(s_list), reversed(y_list)):
                rho = 1.0 / float(y @ s)
                a = rho * float(s @ qv)
                alpha.append(a)
                qv = qv - a * y
            s, y = s_list[-1], y_list[-1]
            qv = qv * (float(s @ y) / float(y @ y))
            for (s, y), a in zip(zip(s_list, y_list), reversed(alpha)):
                rho = 1.0 / float(y @ s)
                b = rho * float(y @ qv)
                qv = qv + s * (a - b)
            d = -qv
        slope = float(g @ d)
        if slope >= 0.0:
            d = -g
            slope = -float(g @ g)
        step = 1.0
        accepted = False
        for _ in range(40):
            z_new = z + step * d
            f_new = objective.value(z_new)
            if f_new <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        if step == 1.0:
            # Expand while the longer step still clears the Armijo line and
            # keeps improving; helps climb out of flat coefficient valleys.
            while step < 1024.0:
                trial = z + 2.0 * step * d
                f_trial = objective.value(trial)
                if f_trial <= f + 1e-4 * (2.0 * step) * slope and f_trial < f_new:
                    step *= 2.0
                    z_new, f_new = trial, f_trial
                else:
                    break
        f_new, g_new = objective.value_and_grad(z_new)
        s_vec = z_new - z
        y_vec = g_new - g
        if float(s_vec @ y_vec) > 1e-14 * float(np.linalg.norm(s_vec)) * float(np.linalg.norm(y_vec)):
            s_list.append(s_vec)
            y_list.append(y_vec)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
        rel_drop = (f - f_new) / max(abs(f), 1.0)
        z, f, g = z_new, f_new, g_new
        history.append(f)
        it += 1
        if np.abs(g).max() <= grad_tol or rel_drop < 1e-14:
            converged = True
    if np.abs(g).max() <= grad_tol:
        converged = True
    return z, history, converged


@dataclass
class SolveResult:
    tau: np.ndarray                 # T x n
    A: np.ndarray                   # T x C_s x 4
    B: np.ndarray                   # T x C_o x 4
    objective_history: np.ndarray   # combined, nonincreasing
    frame_histories: list
    converged: bool
    report: ResidualReport
    data_term: float                # smoothed residual part of the objective

    @property
    def frame_norms(self):
        return self.report.frame_norms


def solve(problem):
    """Recover (tau, A, B); see SolveResult."""
    ctx = build_context(problem)
    T = ctx.human.num_frames
    n = problem.tree.dof

    def run_frame(t):
        objective = _FrameObjective(ctx, t)
        z, history, conv = _lbfgs(objective, objective.initial_point(),
                                  problem.max_iters, problem.grad_tol)
        return objective, z, history, conv

    results = [None] * T
    if problem.threads > 1:
        with ThreadPoolExecutor(max_workers=problem.threads) as pool:
            for t, res in enumerate(pool.map(run_frame, range(T))):
                results[t] = res
    else:
        for t in range(T):
            results[t] = run_frame(t)

    tau = np.zeros((T, n))
    A = np.zeros((T, ctx.c_s, 4))
    B = np.zeros((T, ctx.c_o, 4))
    frame_histories = []
    converged = True
    data_term = 0.0
    for t, (objective, z, history, conv) in enumerate(results):
        tau_t, u_a, u_b = objective.unpack(z)
        tau[t] = tau_t
        A[t] = objective.coefficients(u_a)
        B[t] = objective.coefficients(u_b)
        frame_histories.append(np.asarray(history))
        converged = converged and conv
        r_h, r_o, _, _, _ = objective.residuals(z)
        data_term += _huber(r_h, problem.huber_delta)
        if ctx.object is not None:
            data_term += _huber(r_o, problem.huber_delta)

    width = max(len(h) for h in frame_histories)
    combined = np.zeros(width)
    for h in frame_histories:
        padded = np.concatenate([h, np.full(width - len(h), h[-1])])
        combined += padded

    report = residual_report_ctx(ctx, tau, A, B)
    return SolveResult(tau=tau, A=A, B=B, objective_history=combined,
                       frame_histories=frame_histories, converged=converged,
                       report=report, data_term=float(data_term))


def residual_report_ctx(ctx, tau, A, B):
    """Pure evaluation of the per-frame residuals for given (tau, A, B)."""
    T = ctx.human.num_frames
    tau = np.asarray(tau, dtype=float)
    A = np.asarray(A, dtype=float).reshape(T, ctx.c_s, 4)
    B = np.asarray(B, dtype=float).reshape(T, ctx.c_o, 4)
    r_h = np.zeros((T, ctx.problem.tree.dof))
    r_o = np.zeros((T, 6))
    for t in range(T):
        objective = _FrameObjective(ctx, t)
        z = objective.pack(tau[t], A[t], B[t])
        rh, ro, _, _, _ = objective.residuals(z)
        r_h[t] = rh
        r_o[t] = ro if ctx.object is not None else 0.0
    return ResidualReport(
        r_h=r_h, r_o=r_o,
        frame_norms_h=np.abs(r_h).sum(axis=1),
        frame_norms_o=np.abs(r_o).sum(axis=1),
    )


def residual_report(problem, tau, A, B):
    return residual_report_ctx(build_context(problem), tau, A, B)


def contact_forces(ctx, A, B):
    """Scene and object force trajectories implied by coefficients."""
    T = ctx.human.num_frames
    A = np.asarray(A, dtype=float).reshape(T, ctx.c_s, 4)
    B = np.asarray(B, dtype=float).reshape(T, ctx.c_o, 4)
    f_s = np.zeros((T, ctx.c_s, 3))
    f_o = np.zeros((T, ctx.c_o, 3))
    for t in range(T):
        fr = ctx.frames[t]
        for i in range(ctx.c_s):
            f_s[t, i] = fr.scene_forms[i].force(*A[t, i])
        for j in range(ctx.c_o):
            f_o[t, j] = fr.obj_forms[j].force(*B[t, j])
    return f_s, f_o


@dataclass
class GradientCheckReport:
    max_relative_error: float
    samples: int
    excluded: list            # (frame, reason) pairs on nonsmooth loci


def check_gradient(value, value_and_grad, z, indices, fd_step=1e-5):
    """Max relative error of analytic vs central-difference gradient.

    Errors are measured against the gradient's overall scale so that
    components that are genuinely zero (agreeing roundoff on both sides)
    do not register as disagreement.
    """
    _, g = value_and_grad(z)
    scale = max(1.0, float(np.abs(g).max()))
    worst = 0.0
    for i in indices:
        zp = z.copy(); zp[i] += fd_step
        zm = z.copy(); zm[i] -= fd_step
        fd = (value(zp) - value(zm)) / (2.0 * fd_step)
        denom = max(abs(fd), abs(g[i]), 1e-6 * scale)
        worst = max(worst, abs(fd - g[i]) / denom)
    return worst


def gradient_check(problem, point=None, sample_count=30, seed=None):
    """Compare analytic and finite-difference gradients of the full
    per-frame objective at a feasible point.

    Frames where a contact point sits on the sliding-regularization
    boundary (||reldot_par|| within 0.1% of eps) are excluded: the force
    law is only piecewise smooth there, by design.
    """
    ctx = build_context(problem)
    rng = np.random.default_rng(problem.seed if seed is None else seed)
    T = ctx.human.num_frames
    excluded = []
    worst = 0.0
    done = 0
    attempts = 0
    while done < sample_count and attempts < 20 * sample_count:
        attempts += 1
        t = int(rng.integers(T))
        boundary = False
        for form in ctx.frames[t].scene_forms + ctx.frames[t].obj_forms:
            if abs(form.slide_speed - problem.config.eps) < 1e-3 * problem.config.eps:
                boundary = True
        if boundary:
            excluded.append((t, "sliding-regularization boundary"))
            continue
        objective = _FrameObjective(ctx, t)
        if point is None:
            z = objective.initial_point()
            z = z + 0.1 * rng.standard_normal(z.shape)
            na = len(objective.act)
            z[na:] = np.abs(z[na:]) + 0.5
        else:
            tau, A, B = point
            z = objective.pack(tau[t], A[t], B[t])
        idx = rng.choice(objective.size, size=min(8, objective.size), replace=False)
        err = check_gradient(objective.value, objective.value_and_grad, z, idx,
                             problem.fd_step)
        worst = max(worst, err)
        done += 1
    return GradientCheckReport(max_relative_error=worst, samples=done,
                               excluded=excluded)
