"""File I/O: JSON documents, OBJ meshes, voxel grids, and the conversions
between documents and runtime objects.

Validation failures raise FileFormatError with JSON-path diagnostics
("$.trajectory.dt: field required"); JSON syntax errors carry the line and
column.  Writers are atomic (write to a temp file, then rename) and emit
floats with full round-trip precision.
"""

import json
import os
import tempfile

import numpy as np
from pydantic import ValidationError

from . import schemas
from .contact import ContactCoefficients, ContactModelConfig
from .errors import DomainError, FileFormatError
from .kinematics import ContactPoint, ContactPointSet, Trajectory
from .model import RigidObjectModel, build_tree
from .rotations import exp_so3, log_so3
from .solver import SolveProblem
from .surfaces import (BoxShape, MeshShape, PlaneShape, Pose, SphereShape,
                       StaticAttachment, Surface, TrajectoryAttachment,
                       voxels_to_mesh)

# --------------------------------------------------------------------------
# Generic JSON document handling


def _format_validation_error(err, source):
    lines = []
    for item in err.errors():
        path = "$." + ".".join(str(p) for p in item["loc"]) if item["loc"] else "$"
        lines.append(f"{path}: {item['msg']}")
    return f"{source}: " + "; ".join(lines)


def parse_document(model_cls, data, source="<memory>"):
    """Validate a dict (or JSON text) against a schema class."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise FileFormatError(
                f"{source}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
            ) from None
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        raise FileFormatError(_format_validation_error(e, source)) from None


def load_document(model_cls, path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_document(model_cls, fh.read(), source=str(path))


def atomic_write_text(path, text):
    """Write-temp-then-rename so readers never see a partial file."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_document(doc):
    return json.dumps(doc.model_dump(exclude_none=True), indent=1) + "\n"


def save_document(doc, path):
    atomic_write_text(path, dump_document(doc))


# --------------------------------------------------------------------------
# OBJ meshes (v/f subset, triangles only)


def parse_obj(text, source="<obj>"):
    vertices = []
    faces = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) != 4:
                raise FileFormatError(f"{source}:{ln}: vertex needs 3 coordinates")
            vertices.append([float(x) for x in parts[1:]])
        elif parts[0] == "f":
            if len(parts) != 4:
                raise FileFormatError(f"{source}:{ln}: only triangles are supported")
            idx = []
            for token in parts[1:]:
                idx.append(int(token.split("/")[0]) - 1)
            faces.append(idx)
        else:
            # Ignore other OBJ statements (vn, vt, o, g, usemtl, ...).
            continue
    if not faces:
        raise FileFormatError(f"{source}: no triangles found")
    return np.asarray(vertices, dtype=float), np.asarray(faces, dtype=int)


def load_obj(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_obj(fh.read(), source=str(path))


def dump_obj(vertices, faces):
    out = []
    for v in np.asarray(vertices, dtype=float):
        out.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in np.asarray(faces, dtype=int):
        out.append(f"f {int(f[0]) + 1} {int(f[1]) + 1} {int(f[2]) + 1}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Voxel grids: "Nx Ny Nz" / "cell_size" / "origin x y z" / RLE pairs
# (value run-length ...) in x-fastest order.


def parse_voxels(text, source="<voxels>"):
    tokens = []
    for raw in text.splitlines():
        line = raw.split("#")[0].strip()
        if line:
            tokens.extend(line.split())
    try:
        nx, ny, nz = int(tokens[0]), int(tokens[1]), int(tokens[2])
        cell = float(tokens[3])
        origin = np.array([float(tokens[4]), float(tokens[5]), float(tokens[6])])
        pairs = tokens[7:]
        if len(pairs) % 2 != 0:
            raise FileFormatError(f"{source}: RLE needs (value, run) pairs")
        flat = np.zeros(nx * ny * nz, dtype=bool)
        cursor = 0
        for i in range(0, len(pairs), 2):
            value = int(pairs[i])
            run = int(pairs[i + 1])
            if value not in (0, 1) or run < 0:
                raise FileFormatError(f"{source}: bad RLE pair at index {i}")
            flat[cursor:cursor + run] = bool(value)
            cursor += run
        if cursor != flat.size:
            raise FileFormatError(
                f"{source}: RLE covers {cursor} cells, grid has {flat.size}")
    except (IndexError, ValueError) as e:
        raise FileFormatError(f"{source}: malformed voxel grid: {e}") from None
    occ = flat.reshape(nz, ny, nx).transpose(2, 1, 0)  # x-fastest on disk
    return occ, cell, origin


def load_voxels(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_voxels(fh.read(), source=str(path))


# --------------------------------------------------------------------------
# Documents -> runtime objects


def tree_from_document(doc):
    return build_tree({
        "links": [
            {"name": l.name, "mass": l.mass, "inertia": l.inertia,
             "com_offset": l.com_offset}
            for l in doc.links
        ],
        "joints": [
            {"kind": j.kind, "parent": j.parent, "child": j.child,
             "origin": {"rotation": j.origin.rotation,
                        "translation": j.origin.translation},
             **({"axis": j.axis} if j.axis is not None else {})}
            for j in doc.joints
        ],
    })


def tree_to_document(tree):
    links = [
        schemas.LinkSpec(name=l.name, mass=l.mass,
                         inertia=np.asarray(l.inertia).tolist(),
                         com_offset=np.asarray(l.com_offset).tolist())
        for l in tree.links
    ]
    joints = []
    for j in tree.joints:
        joints.append(schemas.JointSpec(
            kind=j.kind, parent=j.parent, child=j.child,
            origin=schemas.OriginSpec(
                rotation=log_so3(j.origin_rotation).tolist(),
                translation=np.asarray(j.origin_translation).tolist()),
            axis=None if j.axis is None else np.asarray(j.axis).tolist(),
        ))
    return schemas.ModelDocument(links=links, joints=joints)


def shape_from_spec(spec, base_dir="."):
    def need(field):
        value = getattr(spec, field)
        if value is None:
            raise FileFormatError(
                f"surface type {spec.type!r} requires field {field!r}")
        return value

    if spec.type == "plane":
        return PlaneShape(need("point"), need("normal"))
    if spec.type == "sphere":
        return SphereShape(need("center"), need("radius"))
    if spec.type == "box":
        return BoxShape(need("half_extents"))
    if spec.type == "mesh":
        if spec.path is not None:
            V, F = load_obj(os.path.join(base_dir, spec.path))
        else:
            V, F = np.asarray(need("vertices"), float), np.asarray(need("faces"), int)
        return MeshShape(V, F)
    if spec.type == "voxel":
        occ, cell, origin = load_voxels(os.path.join(base_dir, need("path")))
        V, F = voxels_to_mesh(occ, cell, origin)
        return MeshShape(V, F)
    raise FileFormatError(f"unknown surface type {spec.type!r}")


def surface_from_spec(spec, base_dir=".", object_traj=None):
    shape = shape_from_spec(spec, base_dir)
    if spec.attachment == "object":
        if object_traj is None:
            raise FileFormatError(
                "surface attached to the object but the run has no object trajectory")
        attachment = TrajectoryAttachment(object_traj.q, object_traj.dt)
    else:
        pose = Pose(exp_so3(spec.pose.rotation), np.asarray(spec.pose.translation, float))
        attachment = StaticAttachment(pose)
    return Surface(shape, attachment)


def shape_to_spec(shape, attachment="static", pose=None):
    kw = {}
    if pose is not None:
        kw["pose"] = schemas.PoseSpec(
            rotation=log_so3(pose.rotation).tolist(),
            translation=np.asarray(pose.translation).tolist())
    if isinstance(shape, PlaneShape):
        return schemas.SurfaceSpec(type="plane", attachment=attachment,
                                   point=shape.point.tolist(),
                                   normal=shape.normal.tolist(), **kw)
    if isinstance(shape, SphereShape):
        return schemas.SurfaceSpec(type="sphere", attachment=attachment,
                                   center=shape.center.tolist(),
                                   radius=shape.radius, **kw)
    if isinstance(shape, BoxShape):
        return schemas.SurfaceSpec(type="box", attachment=attachment,
                                   half_extents=shape.half.tolist(), **kw)
    if isinstance(shape, MeshShape):
        return schemas.SurfaceSpec(type="mesh", attachment=attachment,
                                   vertices=shape.V.tolist(),
                                   faces=shape.F.tolist(), **kw)
    raise DomainError(f"cannot serialize surface shape {type(shape).__name__}")


def config_from_block(block):
    defaults = ContactModelConfig()
    values = {}
    for name in ("alpha", "beta", "gamma", "d0", "d1", "v0", "eps", "strict_normal"):
        override = getattr(block, name)
        values[name] = getattr(defaults, name) if override is None else override
    return ContactModelConfig(**values)


def config_to_block(config):
    return schemas.ConfigBlock(alpha=config.alpha, beta=config.beta,
                               gamma=config.gamma, d0=config.d0, d1=config.d1,
                               v0=config.v0, eps=config.eps,
                               strict_normal=config.strict_normal)


def resolve_model(doc, base_dir="."):
    if isinstance(doc.model, str):
        model_doc = load_document(schemas.ModelDocument, os.path.join(base_dir, doc.model))
        return tree_from_document(model_doc)
    return tree_from_document(doc.model)


def object_model_from_spec(spec, base_dir="."):
    return RigidObjectModel(
        mass=spec.mass,
        inertia=np.asarray(spec.inertia, dtype=float),
        geometry=shape_from_spec(spec.geometry, base_dir),
    )


def document_to_problem(doc, base_dir=".", **overrides):
    """Build a SolveProblem from a run document.

    Shape consistency (trajectory width vs model DOF, tensor shapes) is
    enforced here with path-bearing messages.
    """
    tree = resolve_model(doc, base_dir)
    human = np.asarray(doc.trajectory.human, dtype=float)
    if human.ndim != 2 or human.shape[1] != tree.dof:
        raise FileFormatError(
            f"$.trajectory.human: expected T x {tree.dof} array, got {human.shape}")
    human_traj = Trajectory(dt=doc.trajectory.dt, q=human)

    obj = None
    object_traj = None
    if doc.trajectory.object is not None:
        arr = np.asarray(doc.trajectory.object, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise FileFormatError(
                f"$.trajectory.object: expected T x 6 array, got {arr.shape}")
        if arr.shape[0] != human.shape[0]:
            raise FileFormatError(
                "$.trajectory.object: frame count differs from $.trajectory.human")
        object_traj = Trajectory(dt=doc.trajectory.dt, q=arr)
        if doc.object_model is None:
            raise FileFormatError(
                "$.object_model: required when an object trajectory is present")
        obj = object_model_from_spec(doc.object_model, base_dir)

    surfaces = [surface_from_spec(s, base_dir, object_traj) for s in doc.surfaces
                if s.attachment == "static"]
    points = ContactPointSet(tuple(
        ContactPoint(p.body, p.offset, p.role) for p in doc.contact_points))

    mask = None
    if doc.actuation_mask is not None:
        mask = np.asarray(doc.actuation_mask, dtype=bool)
        if mask.shape != (tree.dof,):
            raise FileFormatError(
                f"$.actuation_mask: expected {tree.dof} entries, got {mask.shape}")

    kwargs = dict(
        tree=tree,
        human_traj=human_traj,
        surfaces=surfaces,
        contact_points=points,
        config=config_from_block(doc.config),
        obj=obj,
        object_traj=object_traj,
        gravity=np.asarray(doc.gravity, dtype=float),
        w_tau=doc.weights.w_tau,
        w_coef=doc.weights.w_coef,
        actuation_mask=mask,
        seed=doc.seed,
    )
    kwargs.update(overrides)
    return SolveProblem(**kwargs)


def solution_arrays(doc, problem):
    """Validated (tau, A, B) from the document's solution block."""
    if doc.solution is None:
        raise FileFormatError("$.solution: required for residual evaluation")
    T = problem.human_traj.num_frames
    n = problem.tree.dof
    c_s = len(problem.contact_points.scene_points)
    c_o = len(problem.contact_points.object_points)
    tau = np.asarray(doc.solution.tau, dtype=float)
    if tau.shape != (T, n):
        raise FileFormatError(f"$.solution.tau: expected {T} x {n}, got {tau.shape}")
    A = np.asarray(doc.solution.A, dtype=float).reshape(T, c_s, 4) \
        if c_s else np.zeros((T, 0, 4))
    B = np.asarray(doc.solution.B, dtype=float).reshape(T, c_o, 4) \
        if c_o else np.zeros((T, 0, 4))
    try:
        ContactCoefficients(scene=A, hand=B)
    except Exception as e:
        raise FileFormatError(f"$.solution: {e}") from None
    return tau, A, B


# --------------------------------------------------------------------------
# Simulation -> run document


def run_from_simulation(scene, log):
    """Complete run document for a finished simulation: inline model,
    geometry, trajectory, planted coefficients as the solution block,
    logged forces, and the energy ledger."""
    T = log.trajectory.num_frames
    doc = schemas.RunDocument(
        model=tree_to_document(scene.tree),
        trajectory=schemas.TrajectoryBlock(
            dt=scene.dt,
            human=log.trajectory.q.tolist(),
            object=None if log.object_poses is None else log.object_poses.tolist(),
        ),
        object_model=None if scene.obj is None else schemas.ObjectModelSpec(
            mass=scene.obj.mass,
            inertia=np.asarray(scene.obj.inertia).tolist(),
            geometry=shape_to_spec(scene.obj.geometry, attachment="object"),
        ),
        surfaces=[shape_to_spec(s.shape, "static", s.attachment.pose_value)
                  for s in scene.surfaces],
        contact_points=[
            schemas.ContactPointSpec(body=p.body, offset=p.offset.tolist(), role=p.role)
            for p in scene.contact_points.points
        ],
        config=config_to_block(scene.config),
        solution=schemas.SolutionBlock(
            tau=log.tau.tolist(),
            A=np.tile(scene.scene_coeffs, (T, 1, 1)).tolist(),
            B=np.tile(scene.object_coeffs, (T, 1, 1)).tolist(),
        ),
        forces=schemas.ForcesBlock(
            scene=log.scene_forces.tolist(),
            object=log.object_forces.tolist(),
        ),
        energy=schemas.EnergyBlock(
            kinetic=log.kinetic.tolist(),
            grav_pe=log.grav_pe.tolist(),
            spring_pe=log.spring_pe.tolist(),
            friction_work=log.friction_work.tolist(),
            kinetic_friction_work=log.kinetic_friction_work.tolist(),
            damping_work=log.damping_work.tolist(),
        ),
    )
    return doc


def frame_norms_csv(report, per_point=None):
    """CSV of per-frame residual norms; `per_point` optionally appends
    per-contact force magnitude columns (list of T x C arrays)."""
    header = ["frame", "norm_h", "norm_o", "norm_total"]
    columns = [np.arange(report.r_h.shape[0]), report.frame_norms_h,
               report.frame_norms_o, report.frame_norms]
    if per_point is not None:
        forces_s, forces_o = per_point
        for i in range(forces_s.shape[1]):
            header.append(f"scene_{i}_force")
            columns.append(np.linalg.norm(forces_s[:, i], axis=1))
        for j in range(forces_o.shape[1]):
            header.append(f"object_{j}_force")
            columns.append(np.linalg.norm(forces_o[:, j], axis=1))
    lines = [",".join(header)]
    for t in range(report.r_h.shape[0]):
        row = [repr(int(columns[0][t]))] + [repr(float(c[t])) for c in columns[1:]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
