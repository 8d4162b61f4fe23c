"""Articulated-body and rigid-object definitions.

A body is a tree of rigid links connected by joints.  The root joint is
always a free joint (6 DOF: axis-angle rotation + translation), interior
joints are spherical (3 DOF axis-angle) or revolute (1 DOF).  Generalized
coordinates are the concatenated joint parameters in topological order,
so a humanoid with a free root plus 23 spherical joints has 75 DOF.

Trees are immutable after construction and safe to share across workers.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CycleError,
    DimensionError,
    DomainError,
    InertiaError,
    RootError,
    UnknownBodyError,
)
from .rotations import exp_so3

JOINT_DOF = {"free": 6, "spherical": 3, "revolute": 1}

_INERTIA_TOL = 1e-9


def _freeze(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def validate_inertia(inertia, mass, name="link"):
    """Check symmetry, PSD, and the triangle inequality on principal moments."""
    inertia = np.asarray(inertia, dtype=float)
    if inertia.shape != (3, 3):
        raise InertiaError(f"{name}: inertia must be 3x3, got {inertia.shape}")
    scale = max(float(np.abs(inertia).max()), 1.0)
    if not np.allclose(inertia, inertia.T, atol=_INERTIA_TOL * scale):
        raise InertiaError(f"{name}: inertia is not symmetric")
    eig = np.linalg.eigvalsh(0.5 * (inertia + inertia.T))
    if eig.min() < -_INERTIA_TOL * scale:
        raise InertiaError(f"{name}: inertia is not positive semidefinite")
    if mass > 0.0:
        tol = _INERTIA_TOL * scale
        for i in range(3):
            others = eig.sum() - eig[i]
            if others < eig[i] - tol:
                raise InertiaError(
                    f"{name}: principal moments violate the triangle inequality"
                )


@dataclass(frozen=True)
class RigidLink:
    """One rigid segment: inertial data expressed in its own frame."""

    name: str
    mass: float
    inertia: np.ndarray       # 3x3 about the COM, link frame, kg m^2
    com_offset: np.ndarray    # joint frame -> COM, meters

    def __post_init__(self):
        if self.mass < 0.0:
            raise DomainError(f"link {self.name}: negative mass")
        object.__setattr__(self, "inertia", _freeze(self.inertia))
        object.__setattr__(self, "com_offset", _freeze(self.com_offset))
        if self.com_offset.shape != (3,):
            raise DomainError(f"link {self.name}: com_offset must be length 3")
        validate_inertia(self.inertia, self.mass, name=f"link {self.name}")


@dataclass(frozen=True)
class Joint:
    """Connection from a parent frame to a child link frame."""

    kind: str                     # 'free' | 'spherical' | 'revolute'
    parent: str                   # link name or 'world'
    child: str
    origin_rotation: np.ndarray   # 3x3, parent frame -> joint frame
    origin_translation: np.ndarray
    axis: np.ndarray = None       # unit axis, revolute only (joint frame)

    def __post_init__(self):
        if self.kind not in JOINT_DOF:
            raise DomainError(f"joint {self.parent}->{self.child}: unknown kind {self.kind!r}")
        if self.parent == self.child:
            raise CycleError(f"joint {self.parent}->{self.child}: parent equals child")
        object.__setattr__(self, "origin_rotation", _freeze(self.origin_rotation))
        object.__setattr__(self, "origin_translation", _freeze(self.origin_translation))
        if self.kind == "revolute":
            if self.axis is None:
                raise DomainError(f"joint {self.parent}->{self.child}: revolute needs an axis")
            axis = np.asarray(self.axis, dtype=float)
            if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
                raise DomainError(f"joint {self.parent}->{self.child}: axis is not unit length")
            object.__setattr__(self, "axis", _freeze(axis))
        elif self.axis is not None:
            raise DomainError(f"joint {self.parent}->{self.child}: axis only valid for revolute")

    @property
    def dof(self):
        return JOINT_DOF[self.kind]


@dataclass(frozen=True)
class KinematicTree:
    """Validated articulated body.

    Joints are stored in topological order (root first); the generalized
    coordinate vector concatenates joint parameters in that order, free
    joints contributing [rot(3), trans(3)].
    """

    links: tuple
    joints: tuple
    dof: int
    link_index: dict = field(repr=False)
    parent_index: tuple = field(repr=False)   # per joint: parent link index, -1 = world
    child_index: tuple = field(repr=False)    # per joint: child link index
    q_slices: tuple = field(repr=False)       # per joint: (start, stop) into q

    def link_id(self, name):
        try:
            return self.link_index[name]
        except KeyError:
            raise UnknownBodyError(f"unknown link {name!r}") from None

    def joint_of_link(self, link_idx):
        """Joint whose child is the given link (same index by construction)."""
        return self.joints[link_idx]

    def check_config(self, q, label="q"):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise DimensionError(f"{label}: expected length {self.dof}, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise DimensionError(f"{label}: non-finite entries")
        return q

    def rotation_triples(self):
        """(start index, joint) for every 3-vector axis-angle block in q."""
        out = []
        for j, (start, _) in zip(self.joints, self.q_slices):
            if j.kind in ("free", "spherical"):
                out.append(start)
        return out


def build_tree(spec):
    """Construct a KinematicTree from a parsed model description.

    `spec` is a dict with 'links' and 'joints' lists; see the README for
    the exact schema.  Raises CycleError / RootError / InertiaError /
    UnknownBodyError on malformed input.
    """
    links = {}
    for entry in spec["links"]:
        link = RigidLink(
            name=entry["name"],
            mass=float(entry["mass"]),
            inertia=np.asarray(entry["inertia"], dtype=float),
            com_offset=np.asarray(entry.get("com_offset", (0.0, 0.0, 0.0)), dtype=float),
        )
        if link.name in links:
            raise CycleError(f"duplicate link name {link.name!r}")
        links[link.name] = link

    joints = []
    for entry in spec["joints"]:
        origin = entry.get("origin", {})
        rot = np.asarray(origin.get("rotation", (0.0, 0.0, 0.0)), dtype=float)
        if rot.shape == (3,):
            rot = exp_so3(rot)
        axis = entry.get("axis")
        joints.append(Joint(
            kind=entry["kind"],
            parent=entry["parent"],
            child=entry["child"],
            origin_rotation=rot,
            origin_translation=np.asarray(origin.get("translation", (0.0, 0.0, 0.0)), dtype=float),
            axis=None if axis is None else np.asarray(axis, dtype=float),
        ))
    return assemble_tree(tuple(links.values()), tuple(joints))


def assemble_tree(links, joints):
    """Validate connectivity and produce the indexed, immutable tree."""
    names = {l.name for l in links}
    by_child = {}
    roots = []
    for j in joints:
        if j.child not in names:
            raise UnknownBodyError(f"joint child {j.child!r} is not a link")
        if j.parent != "world" and j.parent not in names:
            raise UnknownBodyError(f"joint parent {j.parent!r} is not a link")
        if j.child in by_child:
            raise CycleError(f"link {j.child!r} has more than one parent joint")
        by_child[j.child] = j
        if j.parent == "world":
            roots.append(j)

    if len(roots) == 0:
        raise RootError("no root joint (parent 'world') found")
    if len(roots) > 1:
        raise RootError("multiple root joints found")
    if roots[0].kind != "free":
        raise RootError(f"root joint must be free, got {roots[0].kind!r}")
    missing = names - set(by_child)
    if missing:
        raise CycleError(f"links without a parent joint: {sorted(missing)}")

    # Walk from the root; anything unreached means a cycle or disconnection.
    children = {}
    for j in joints:
        children.setdefault(j.parent, []).append(j)
    ordered_joints = []
    stack = [roots[0]]
    seen = set()
    while stack:
        j = stack.pop()
        if j.child in seen:
            raise CycleError(f"link {j.child!r} reached twice; joint graph has a cycle")
        seen.add(j.child)
        ordered_joints.append(j)
        stack.extend(reversed(children.get(j.child, [])))
    if len(seen) != len(names):
        raise CycleError(f"unreachable links: {sorted(names - seen)}")

    link_list = tuple(
        next(l for l in links if l.name == j.child) for j in ordered_joints
    )
    link_index = {l.name: i for i, l in enumerate(link_list)}
    parent_index = tuple(
        -1 if j.parent == "world" else link_index[j.parent] for j in ordered_joints
    )
    child_index = tuple(link_index[j.child] for j in ordered_joints)

    q_slices = []
    cursor = 0
    for j in ordered_joints:
        q_slices.append((cursor, cursor + j.dof))
        cursor += j.dof

    return KinematicTree(
        links=link_list,
        joints=tuple(ordered_joints),
        dof=cursor,
        link_index=link_index,
        parent_index=parent_index,
        child_index=child_index,
        q_slices=tuple(q_slices),
    )


def box_inertia(mass, half_extents):
    """Solid-box inertia about its COM: I_xx = m (b^2 + c^2) / 3 for half
    extents (a, b, c), and cyclic permutations."""
    if mass < 0.0:
        raise DomainError("box_inertia: negative mass")
    h = np.asarray(half_extents, dtype=float)
    if h.shape != (3,) or np.any(h < 0.0):
        raise DomainError("box_inertia: half_extents must be 3 nonnegative values")
    a2, b2, c2 = h * h
    return np.diag([
        mass * (b2 + c2) / 3.0,
        mass * (a2 + c2) / 3.0,
        mass * (a2 + b2) / 3.0,
    ])


@dataclass(frozen=True)
class RigidObjectModel:
    """Free 6-DOF rigid body; pose follows the free-joint layout [rot, trans]."""

    mass: float
    inertia: np.ndarray           # 3x3 about the COM, body frame
    geometry: object = None       # Surface in body frame, set by the caller
    com_offset: np.ndarray = None

    def __post_init__(self):
        if self.mass < 0.0:
            raise DomainError("object: negative mass")
        object.__setattr__(self, "inertia", _freeze(self.inertia))
        if self.com_offset is None:
            object.__setattr__(self, "com_offset", _freeze(np.zeros(3)))
        else:
            object.__setattr__(self, "com_offset", _freeze(self.com_offset))
        validate_inertia(self.inertia, self.mass, name="object")

    def as_tree(self):
        """The object viewed as a one-link tree, so the same dynamics code
        produces M_o, C_o, G_o and its contact Jacobians."""
        link = RigidLink("object", self.mass, self.inertia, self.com_offset)
        joint = Joint(
            kind="free", parent="world", child="object",
            origin_rotation=np.eye(3), origin_translation=np.zeros(3),
        )
        return assemble_tree((link,), (joint,))
