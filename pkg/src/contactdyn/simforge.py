"""Forward-simulation oracle.

Integrates an articulated body (optionally coupled to a free rigid object)
under the contact model with semi-implicit Euler, logging trajectories,
per-point contact forces, reaction torques on locked DOFs, and an energy
ledger.  The contact forces go through exactly the same code path the
analysis side uses, so a simulated trajectory refit through finite
differences and the residual evaluator is a meaningful zero-point test.

Built-in presets:

  rest      1 kg cube dropped 5 cm onto the plane z = 0; settles with the
            total normal force equal to its weight.
  incline   1 kg block on a tilted plane; slides for small mu, holds for
            mu well above tan(theta).
  pendulum  contact-free point-mass pendulum on a locked base; energy is
            conserved to O(dt).
  carry     locked 2-link arm whose palm points support a 2 kg box through
            object-mode contacts; the box settles onto the palm.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import contact as cm
from .dynamics import GRAVITY, bias_and_gravity, inverse_dynamics, mass_matrix
from .errors import BlowupError, DomainError
from .kinematics import (ContactPoint, ContactPointSet, Trajectory,
                         forward_kinematics, point_jacobian_fk)
from .model import RigidObjectModel, box_inertia, build_tree
from .rotations import left_jacobian
from .surfaces import (BoxShape, PlaneShape, Pose, Surface,
                       TrajectoryAttachment, nearest_among)


@dataclass
class Scene:
    """Everything needed to run one deterministic simulation."""

    name: str
    tree: object
    surfaces: list
    config: cm.ContactModelConfig
    contact_points: ContactPointSet
    scene_coeffs: np.ndarray          # C_s x 4, constant over time
    object_coeffs: np.ndarray         # C_o x 4
    q0: np.ndarray
    v0: np.ndarray
    dt: float
    steps: int
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    locked_dofs: tuple = ()
    obj: RigidObjectModel = None
    obj_q0: np.ndarray = None
    obj_v0: np.ndarray = None
    residual_constant: float = 500.0  # c in the round-trip bound c * dt * m g

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.01):
            raise DomainError("scene dt must be in (0, 0.01] s")
        self.q0 = np.asarray(self.q0, dtype=float)
        self.v0 = np.asarray(self.v0, dtype=float)
        self.scene_coeffs = np.asarray(self.scene_coeffs, dtype=float).reshape(-1, 4)
        self.object_coeffs = np.asarray(self.object_coeffs, dtype=float).reshape(-1, 4)

    @property
    def total_mass(self):
        m = sum(l.mass for l in self.tree.links)
        if self.obj is not None:
            m += self.obj.mass
        return m


@dataclass
class SimulationLog:
    """Trajectories, force logs, and the per-step energy ledger."""

    scene: Scene
    trajectory: Trajectory              # human q, T x n
    object_poses: np.ndarray            # T x 6 or None
    tau: np.ndarray                     # T x n, reactions on locked DOFs
    scene_forces: np.ndarray            # T x C_s x 3
    object_forces: np.ndarray           # T x C_o x 3
    kinetic: np.ndarray                 # per frame, J
    grav_pe: np.ndarray
    spring_pe: np.ndarray
    friction_work: np.ndarray           # per step, work done on the system
    kinetic_friction_work: np.ndarray   # per step, always <= 0
    damping_work: np.ndarray            # per step, always <= 0


def _mass_weighted_com(tree, fk):
    out = np.zeros(3)
    for c, link in enumerate(tree.links):
        com = fk.link_pos[c] + fk.link_rot[c] @ link.com_offset
        out += link.mass * com
    return out


def simulate(scene):
    """Run the scene; returns a SimulationLog with steps + 1 frames."""
    tree = scene.tree
    n = tree.dof
    locked = np.zeros(n, dtype=bool)
    if scene.locked_dofs:
        locked[list(scene.locked_dofs)] = True
    free = ~locked

    scene_pts = scene.contact_points.scene_points
    object_pts = scene.contact_points.object_points
    if scene.scene_coeffs.shape[0] != len(scene_pts):
        raise DomainError("scene coefficient rows must match scene contact points")
    if scene.object_coeffs.shape[0] != len(object_pts):
        raise DomainError("object coefficient rows must match object contact points")

    has_obj = scene.obj is not None
    obj_tree = scene.obj.as_tree() if has_obj else None
    obj_surface = Surface(scene.obj.geometry) if has_obj else None

    T = scene.steps + 1
    q = scene.q0.copy()
    v = scene.v0.copy()
    if has_obj:
        qo = np.asarray(scene.obj_q0, dtype=float).copy()
        vo = np.asarray(scene.obj_v0, dtype=float).copy()

    g = np.asarray(scene.gravity, dtype=float)

    qs = np.empty((T, n))
    taus = np.zeros((T, n))
    obj_qs = np.empty((T, 6)) if has_obj else None
    f_scene = np.zeros((T, len(scene_pts), 3))
    f_obj = np.zeros((T, len(object_pts), 3))
    kinetic = np.empty(T)
    grav_pe = np.empty(T)
    spring_pe = np.empty(T)
    fric_w = np.zeros(T - 1)
    kin_fric_w = np.zeros(T - 1)
    damp_w = np.zeros(T - 1)

    prev_pdot = {i: None for i in range(len(scene_pts))}
    prev_obj_acc = np.zeros(3)

    for t in range(T):
        fk = forward_kinematics(tree, q)
        M = mass_matrix(tree, q)
        C, G = bias_and_gravity(tree, q, v, g)

        if has_obj:
            pose = Pose.from_vector(qo)
            w_o = left_jacobian(qo[:3]) @ vo[:3]
            bound = obj_surface.bind(pose, vo[3:], w_o)
            Mo = mass_matrix(obj_tree, qo)
            Co, Go = bias_and_gravity(obj_tree, qo, vo, g)
            fko = forward_kinematics(obj_tree, qo)

        Q = np.zeros(n)
        Qo = np.zeros(6)
        step_Ws = 0.0
        step_Wk = 0.0
        step_Wd = 0.0
        spring = 0.0

        for i, cp in enumerate(scene_pts):
            li = tree.link_id(cp.body)
            p = fk.link_rot[li] @ cp.offset + fk.link_pos[li]
            J = point_jacobian_fk(tree, q, fk, li, cp.offset)
            pdot = J @ v
            pddot = np.zeros(3) if prev_pdot[i] is None else (pdot - prev_pdot[i]) / scene.dt
            prev_pdot[i] = pdot
            query = nearest_among(scene.surfaces, p)
            state = cm.ContactPointState(p, pdot, query, pddot=pddot)
            lam, f_n, f_s, f_k = cm.contact_force_parts(
                state, scene.scene_coeffs[i], scene.config, cm.STATIC_SCENE, g)
            f_scene[t, i] = lam
            Q += J.T @ lam
            reldot = state.reldot()
            step_Ws += float(f_s @ reldot) * scene.dt
            step_Wk += float(f_k @ reldot) * scene.dt
            # Split the damping component out of the spring for the ledger.
            b = -float(reldot @ query.n)
            gate_val = cm.gate(state.rel(), query.n, scene.config)
            step_Wd += -gate_val * scene.scene_coeffs[i][1] * b * b * scene.dt
            arm = cm.contact_force_affine(state, scene.config, cm.STATIC_SCENE, g).a
            if arm > 0.0:
                spring += 0.5 * scene.scene_coeffs[i][0] * arm * arm

        if has_obj:
            for jdx, cp in enumerate(object_pts):
                li = tree.link_id(cp.body)
                p = fk.link_rot[li] @ cp.offset + fk.link_pos[li]
                J = point_jacobian_fk(tree, q, fk, li, cp.offset)
                pdot = J @ v
                query = bound.nearest(p)
                state = cm.ContactPointState(p, pdot, query,
                                             object_acceleration=prev_obj_acc.copy())
                lam, f_n, f_s, f_k = cm.contact_force_parts(
                    state, scene.object_coeffs[jdx], scene.config, cm.MOVING_OBJECT, g)
                f_obj[t, jdx] = lam
                Q += J.T @ lam
                x_local = pose.invert_point(query.x)
                Jo = point_jacobian_fk(obj_tree, qo, fko, 0, x_local)
                Qo -= Jo.T @ lam
                reldot = state.reldot()
                step_Ws += float(f_s @ reldot) * scene.dt
                step_Wk += float(f_k @ reldot) * scene.dt
                b = -float(reldot @ query.n)
                gate_val = cm.gate(state.rel(), query.n, scene.config)
                step_Wd += -gate_val * scene.object_coeffs[jdx][1] * b * b * scene.dt
                arm = cm.contact_force_affine(state, scene.config, cm.MOVING_OBJECT, g).a
                if arm > 0.0:
                    spring += 0.5 * scene.object_coeffs[jdx][0] * arm * arm

        rhs = Q - C - G
        vdot = np.zeros(n)
        if free.any():
            Mff = M[np.ix_(free, free)]
            vdot[free] = np.linalg.solve(Mff, rhs[free])
        if locked.any():
            taus[t, locked] = (M @ vdot + C + G - Q)[locked]

        if has_obj:
            vdot_o = np.linalg.solve(Mo, Qo - Co - Go)

        # Ledger at the pre-step state.
        kinetic[t] = 0.5 * float(v @ (M @ v))
        grav_pe[t] = -float(_mass_weighted_com(tree, fk) @ g)
        spring_pe[t] = spring
        if has_obj:
            kinetic[t] += 0.5 * float(vo @ (Mo @ vo))
            fko = forward_kinematics(obj_tree, qo)
            grav_pe[t] += -float(_mass_weighted_com(obj_tree, fko) @ g)

        qs[t] = q
        if has_obj:
            obj_qs[t] = qo

        if t < T - 1:
            fric_w[t] = step_Ws + step_Wk
            kin_fric_w[t] = step_Wk
            damp_w[t] = step_Wd
            v = v + scene.dt * vdot
            v[locked] = 0.0
            q = q + scene.dt * v
            if has_obj:
                prev_obj_acc = vdot_o[3:].copy()
                vo = vo + scene.dt * vdot_o
                qo = qo + scene.dt * vo
            if max(np.abs(q).max(), np.abs(v).max()) > 1e6:
                raise BlowupError(f"state diverged at step {t}")

    return SimulationLog(
        scene=scene,
        trajectory=Trajectory(dt=scene.dt, q=qs),
        object_poses=obj_qs,
        tau=taus,
        scene_forces=f_scene,
        object_forces=f_obj,
        kinetic=kinetic,
        grav_pe=grav_pe,
        spring_pe=spring_pe,
        friction_work=fric_w,
        kinetic_friction_work=kin_fric_w,
        damping_work=damp_w,
    )


@dataclass
class EnergyAudit:
    """Per-step mechanical-energy balance report."""

    errors: np.ndarray         # |dE - W_friction - W_damping| per step
    budget: float
    flagged: np.ndarray        # step indices exceeding the budget
    friction_dissipation: float  # total energy removed by friction, >= 0 for kinetic
    damping_dissipation: float


def energy_audit(log, budget=None):
    """Check dE_mech = friction work + damping work step by step.

    The default budget is mass * g * (1 m/s) * dt per step, a generous
    power scale; steps above it (impacts, gate transitions) are flagged.
    """
    E = log.kinetic + log.grav_pe + log.spring_pe
    dE = np.diff(E)
    errors = np.abs(dE - log.friction_work - log.damping_work)
    if budget is None:
        budget = log.scene.total_mass * 9.81 * 1.0 * log.scene.dt
    flagged = np.nonzero(errors > budget)[0]
    return EnergyAudit(
        errors=errors,
        budget=float(budget),
        flagged=flagged,
        friction_dissipation=float(-log.friction_work.sum()),
        damping_dissipation=float(-log.damping_work.sum()),
    )


# ---------------------------------------------------------------------------
# Presets


def _single_body_tree(name, mass, half_extents):
    return build_tree({
        "links": [{"name": name, "mass": mass,
                   "inertia": box_inertia(mass, half_extents).tolist()}],
        "joints": [{"kind": "free", "parent": "world", "child": name}],
    })


def _settle_offset(config, kappa, per_point_load):
    """Signed normal offset where the gated springs carry the load."""
    lo, hi = 0.0, config.d0

    def force(s):
        state_gate = (cm.sigmoid(-config.alpha * (abs(s) - config.d0))
                      * cm.sigmoid(config.beta * (s + config.d1)))
        return state_gate * kappa * (config.d0 - s)

    target = per_point_load
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if force(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def preset_rest(dt=1e-3, duration=1.5, drop=0.05, kappa=5e3, delta=200.0,
                mu=0.6, rho=0.0):
    """1 kg cube dropped onto the plane z = 0; settles on four corner
    springs with total normal force equal to its weight."""
    half = 0.05
    tree = _single_body_tree("block", 1.0, (half, half, half))
    corners = [(-half, -half, -half), (half, -half, -half),
               (half, half, -half), (-half, half, -half)]
    points = ContactPointSet(tuple(
        ContactPoint("block", c, "scene") for c in corners))
    q0 = np.zeros(6)
    q0[5] = half + drop
    return Scene(
        name="rest",
        tree=tree,
        surfaces=[Surface(PlaneShape((0, 0, 0), (0, 0, 1)))],
        config=cm.ContactModelConfig(),
        contact_points=points,
        scene_coeffs=np.tile([kappa, delta, rho, mu], (4, 1)),
        object_coeffs=np.zeros((0, 4)),
        q0=q0,
        v0=np.zeros(6),
        dt=dt,
        steps=int(round(duration / dt)),
        residual_constant=2000.0,
    )


def preset_incline(theta_deg=10.0, mu=0.05, rho=0.0, kappa=5e3, delta=200.0,
                   dt=1e-4, duration=2.0):
    """1 kg block on a tilted plane, contacting through its COM point.

    tan(10 deg) ~ 0.176 separates sliding from holding.  dt and the
    sliding-regularization floor eps are paired so the in-band viscous
    stiffness stays explicit-integration stable: mu N dt / (m eps) < 2.
    """
    theta = math.radians(theta_deg)
    tree = _single_body_tree("block", 1.0, (0.05, 0.05, 0.05))
    normal = np.array([-math.sin(theta), 0.0, math.cos(theta)])
    # Tight buffers keep the propulsive static-friction term (magnitude
    # ~ gate * rho * d0 on a plane, where the tangential offset is zero)
    # below the kinetic-friction margin mu N - m g sin(theta); otherwise
    # a planted rho can sustain creep that no friction can arrest.
    cfg = cm.ContactModelConfig(eps=5e-4, d0=0.005, d1=0.0025)
    load = 9.81 * math.cos(theta)
    s0 = _settle_offset(cfg, kappa, load)
    q0 = np.zeros(6)
    q0[3:] = s0 * normal
    points = ContactPointSet((ContactPoint("block", (0, 0, 0), "scene"),))
    return Scene(
        name="incline",
        tree=tree,
        surfaces=[Surface(PlaneShape((0, 0, 0), normal))],
        config=cfg,
        contact_points=points,
        scene_coeffs=np.array([[kappa, delta, rho, mu]]),
        object_coeffs=np.zeros((0, 4)),
        q0=q0,
        v0=np.zeros(6),
        dt=dt,
        steps=int(round(duration / dt)),
        # Lagged vs central-difference friction directions leave a larger
        # (still first-order) refit residual than the smooth presets.
        residual_constant=10000.0,
    )


def preset_pendulum(dt=1e-3, duration=2.0, angle=0.5):
    """Contact-free point-mass pendulum (m = l = 1) on a locked base."""
    tree = build_tree({
        "links": [
            {"name": "base", "mass": 1.0, "inertia": np.zeros((3, 3)).tolist()},
            {"name": "rod", "mass": 1.0, "inertia": np.zeros((3, 3)).tolist(),
             "com_offset": [0.0, 0.0, -1.0]},
        ],
        "joints": [
            {"kind": "free", "parent": "world", "child": "base"},
            {"kind": "revolute", "parent": "base", "child": "rod", "axis": [0, 1, 0]},
        ],
    })
    q0 = np.zeros(7)
    q0[6] = angle
    return Scene(
        name="pendulum",
        tree=tree,
        surfaces=[],
        config=cm.ContactModelConfig(),
        contact_points=ContactPointSet(()),
        scene_coeffs=np.zeros((0, 4)),
        object_coeffs=np.zeros((0, 4)),
        q0=q0,
        v0=np.zeros(7),
        dt=dt,
        steps=int(round(duration / dt)),
        locked_dofs=tuple(range(6)),
        residual_constant=200.0,
    )


def preset_carry(dt=1e-3, duration=1.5, box_mass=2.0, kappa=5e3, delta=200.0,
                 mu=0.6, rho=0.0):
    """Locked 2-link arm holding a box on four palm points.

    The box settles onto the palm; at the static hold the summed contact
    force on the hand is the box weight, pointing down.
    """
    tree = build_tree({
        "links": [
            {"name": "base", "mass": 1.0, "inertia": (np.eye(3) * 0.01).tolist()},
            {"name": "upper", "mass": 1.0,
             "inertia": box_inertia(1.0, (0.2, 0.03, 0.03)).tolist(),
             "com_offset": [0.2, 0.0, 0.0]},
            {"name": "hand", "mass": 1.0,
             "inertia": box_inertia(1.0, (0.2, 0.03, 0.03)).tolist(),
             "com_offset": [0.2, 0.0, 0.0]},
        ],
        "joints": [
            {"kind": "free", "parent": "world", "child": "base"},
            {"kind": "revolute", "parent": "base", "child": "upper", "axis": [0, 1, 0]},
            {"kind": "revolute", "parent": "upper", "child": "hand", "axis": [0, 1, 0],
             "origin": {"translation": [0.4, 0.0, 0.0]}},
        ],
    })
    palm = [(0.3, -0.05, 0.0), (0.3, 0.05, 0.0), (0.4, -0.05, 0.0), (0.4, 0.05, 0.0)]
    points = ContactPointSet(tuple(
        ContactPoint("hand", p, "object") for p in palm))

    half = 0.1
    obj = RigidObjectModel(
        mass=box_mass,
        inertia=box_inertia(box_mass, (half, half, half)),
        geometry=BoxShape((half, half, half)),
    )
    cfg = cm.ContactModelConfig()
    load = box_mass * 9.81 / 4.0
    s0 = _settle_offset(cfg, kappa, load)
    obj_q0 = np.zeros(6)
    obj_q0[3] = 0.75                  # centered over the palm (x in [0.7, 0.8])
    obj_q0[5] = half + s0 + 0.002     # slight lift; settles in a few frames

    n = tree.dof
    return Scene(
        name="carry",
        tree=tree,
        surfaces=[],
        config=cfg,
        contact_points=points,
        scene_coeffs=np.zeros((0, 4)),
        object_coeffs=np.tile([kappa, delta, rho, mu], (4, 1)),
        q0=np.zeros(n),
        v0=np.zeros(n),
        dt=dt,
        steps=int(round(duration / dt)),
        locked_dofs=tuple(range(n)),
        obj=obj,
        obj_q0=obj_q0,
        obj_v0=np.zeros(6),
        residual_constant=2000.0,
    )


def as_problem(scene, log, start=0, end=None, **overrides):
    """SolveProblem for refitting a simulated trajectory (or a window of
    it), with the scene's geometry and contact layout carried over."""
    from .solver import SolveProblem

    end = log.trajectory.num_frames if end is None else end
    human = Trajectory(dt=scene.dt, q=log.trajectory.q[start:end].copy())
    obj_traj = None
    if log.object_poses is not None:
        obj_traj = Trajectory(dt=scene.dt, q=log.object_poses[start:end].copy())
    kwargs = dict(
        tree=scene.tree,
        human_traj=human,
        surfaces=scene.surfaces,
        contact_points=scene.contact_points,
        config=scene.config,
        obj=scene.obj,
        object_traj=obj_traj,
        gravity=scene.gravity,
    )
    kwargs.update(overrides)
    return SolveProblem(**kwargs)


def planted_solution(scene, log, start=0, end=None):
    """(tau, A, B) tensors the simulator actually applied on a window."""
    end = log.trajectory.num_frames if end is None else end
    T = end - start
    tau = log.tau[start:end].copy()
    A = np.tile(scene.scene_coeffs, (T, 1, 1))
    B = np.tile(scene.object_coeffs, (T, 1, 1))
    return tau, A, B


PRESETS = {
    "rest": preset_rest,
    "incline": preset_incline,
    "pendulum": preset_pendulum,
    "carry": preset_carry,
}


def make_preset(name, **overrides):
    if name not in PRESETS:
        raise DomainError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return PRESETS[name](**overrides)
