"""Request handlers shared by the HTTP service and the CLI.

Each handler takes a validated request model and returns a response
model; the FastAPI app and the CLI are both thin wrappers around these.
Relative paths inside run documents (model refs, mesh files) resolve
against `base_dir`, which is the server working directory for HTTP
clients, so remote callers should inline their models.
"""

import numpy as np

from .. import __version__, metrics, schemas
from ..errors import DimensionError, FileFormatError
from ..kinematics import Trajectory
from ..runio import (config_from_block, document_to_problem, frame_norms_csv,
                     object_model_from_spec, resolve_model, run_from_simulation,
                     solution_arrays, surface_from_spec)
from ..simforge import PRESETS, energy_audit, make_preset, simulate
from ..solver import (build_context, contact_forces, gradient_check,
                      residual_report_ctx, solve)
from ..surfaces import Surface, TrajectoryAttachment

PRESET_DESCRIPTIONS = {
    "rest": "1 kg cube dropped onto the plane z = 0; settles on corner springs",
    "incline": "1 kg block on a tilted plane; slides or holds depending on mu",
    "pendulum": "contact-free point-mass pendulum on a locked base",
    "carry": "locked 2-link arm supporting a 2 kg box on palm contact points",
}


def health():
    return schemas.HealthResponse(status="ok", version=__version__)


def list_presets():
    return schemas.PresetListResponse(presets=[
        schemas.PresetInfo(name=name, description=PRESET_DESCRIPTIONS[name])
        for name in sorted(PRESETS)
    ])


def simulate_preset(req):
    scene = make_preset(req.preset, **req.overrides.as_kwargs())
    log = simulate(scene)
    audit = energy_audit(log)
    return schemas.SimulateResponse(
        run=run_from_simulation(scene, log),
        audit_flagged_steps=[int(i) for i in audit.flagged],
        friction_dissipation=audit.friction_dissipation,
        damping_dissipation=audit.damping_dissipation,
    )


def _window_document(doc, start, end):
    if start == 0 and end is None:
        return doc
    new = doc.model_copy(deep=True)
    new.trajectory.human = doc.trajectory.human[start:end]
    if doc.trajectory.object is not None:
        new.trajectory.object = doc.trajectory.object[start:end]
    new.solution = None
    new.forces = None
    new.energy = None
    return new


def solve_run(req, base_dir="."):
    doc = _window_document(req.run, req.options.start_frame, req.options.end_frame)
    overrides = dict(max_iters=req.options.max_iters, threads=req.options.threads)
    if req.options.seed is not None:
        overrides["seed"] = req.options.seed
    problem = document_to_problem(doc, base_dir, **overrides)
    result = solve(problem)
    solved = doc.model_copy(deep=True)
    solved.solution = schemas.SolutionBlock(
        tau=result.tau.tolist(), A=result.A.tolist(), B=result.B.tolist())
    report = result.report
    return schemas.SolveResponse(
        converged=result.converged,
        run=solved,
        objective_history=[float(v) for v in result.objective_history],
        residual=schemas.ResidualSummary(
            aggregate=report.aggregate,
            max_frame_norm=float(report.frame_norms.max()),
            frame_norms=report.frame_norms.tolist(),
        ),
    )


def residual_run(req, base_dir="."):
    problem = document_to_problem(req.run, base_dir)
    tau, A, B = solution_arrays(req.run, problem)
    ctx = build_context(problem)
    report = residual_report_ctx(ctx, tau, A, B)
    per_point = contact_forces(ctx, A, B) if req.per_point else None
    return schemas.ResidualResponse(
        aggregate=report.aggregate,
        frame_norms_h=report.frame_norms_h.tolist(),
        frame_norms_o=report.frame_norms_o.tolist(),
        csv=frame_norms_csv(report, per_point),
    )


def _metric_points(doc, explicit, role=None):
    if explicit is not None:
        return [(p.body, p.offset) for p in explicit]
    return [(p.body, p.offset) for p in doc.contact_points
            if role is None or p.role == role]


def metrics_run(req, base_dir="."):
    opts = req.options
    tree = resolve_model(req.gt, base_dir)
    pred_q = np.asarray(req.pred.trajectory.human, dtype=float)
    gt_q = np.asarray(req.gt.trajectory.human, dtype=float)
    if pred_q.shape != gt_q.shape:
        raise DimensionError(
            f"pred and gt trajectories must align: {pred_q.shape} vs {gt_q.shape}")
    pred = Trajectory(dt=req.pred.trajectory.dt, q=pred_q)
    gt = Trajectory(dt=req.gt.trajectory.dt, q=gt_q)

    object_surface = None
    if req.gt.object_model is not None and req.gt.trajectory.object is not None:
        obj = object_model_from_spec(req.gt.object_model, base_dir)
        obj_traj = Trajectory(dt=req.gt.trajectory.dt,
                              q=np.asarray(req.gt.trajectory.object, dtype=float))
        object_surface = Surface(obj.geometry,
                                 TrajectoryAttachment(obj_traj.q, obj_traj.dt))

    scene_surfaces = [surface_from_spec(s, base_dir) for s in req.gt.surfaces
                      if s.attachment == "static"]

    body_points = _metric_points(req.gt, opts.body_points)
    hand_points = _metric_points(req.gt, opts.hand_points, role="object")
    foot_points = _metric_points(req.gt, opts.foot_points, role="scene")

    report = metrics.evaluate(
        pred, gt, tree,
        hand_links=opts.hand_links,
        body_points=body_points,
        hand_points=hand_points,
        foot_points=foot_points,
        object_surface=object_surface,
        scene_surfaces=scene_surfaces,
        collision_threshold=opts.collision_threshold,
        contact_threshold=opts.contact_threshold,
        ground_height=opts.ground_height,
        foot_height=opts.foot_height,
    )
    return schemas.MetricsResponse(
        report={k: float(v) for k, v in report.to_dict().items()},
        text=report.to_text(),
        csv=report.to_csv(),
    )


def gradcheck_run(req, base_dir="."):
    problem = document_to_problem(req.run, base_dir)
    report = gradient_check(problem, sample_count=req.samples, seed=req.seed)
    return schemas.GradcheckResponse(
        max_relative_error=report.max_relative_error,
        samples=report.samples,
        excluded_frames=sorted({int(t) for t, _ in report.excluded}),
    )
