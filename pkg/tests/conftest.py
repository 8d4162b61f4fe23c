import numpy as np
import pytest

from contactdyn.contact import ContactPointState
from contactdyn.model import box_inertia, build_tree
from contactdyn.surfaces import SurfaceQuery


def single_box_tree(mass=1.0, half=0.5, name="box"):
    return build_tree({
        "links": [{"name": name, "mass": mass,
                   "inertia": box_inertia(mass, (half, half, half)).tolist()}],
        "joints": [{"kind": "free", "parent": "world", "child": name}],
    })


def pendulum_tree(mass=1.0, length=1.0):
    """Point mass on a massless rod, revolute about y, hanging along -z at
    q = 0; the base is a zero-mass link on the free root."""
    return build_tree({
        "links": [
            {"name": "base", "mass": 0.0, "inertia": np.zeros((3, 3)).tolist()},
            {"name": "rod", "mass": mass, "inertia": np.zeros((3, 3)).tolist(),
             "com_offset": [0.0, 0.0, -length]},
        ],
        "joints": [
            {"kind": "free", "parent": "world", "child": "base"},
            {"kind": "revolute", "parent": "base", "child": "rod", "axis": [0, 1, 0]},
        ],
    })


def two_link_planar():
    """Two revolute-z links along +x, unit lengths, point masses at tips."""
    return build_tree({
        "links": [
            {"name": "base", "mass": 0.0, "inertia": np.zeros((3, 3)).tolist()},
            {"name": "a", "mass": 1.0, "inertia": np.zeros((3, 3)).tolist(),
             "com_offset": [1.0, 0.0, 0.0]},
            {"name": "b", "mass": 1.0, "inertia": np.zeros((3, 3)).tolist(),
             "com_offset": [1.0, 0.0, 0.0]},
        ],
        "joints": [
            {"kind": "free", "parent": "world", "child": "base"},
            {"kind": "revolute", "parent": "base", "child": "a", "axis": [0, 0, 1]},
            {"kind": "revolute", "parent": "a", "child": "b", "axis": [0, 0, 1],
             "origin": {"translation": [1.0, 0.0, 0.0]}},
        ],
    })


def humanoid_tree(n_spherical=23):
    """Free root plus a chain of spherical joints (75 DOF at the default)."""
    links = [{"name": "root", "mass": 5.0,
              "inertia": box_inertia(5.0, (0.15, 0.1, 0.2)).tolist()}]
    joints = [{"kind": "free", "parent": "world", "child": "root"}]
    for i in range(n_spherical):
        links.append({"name": f"seg{i}", "mass": 1.0,
                      "inertia": box_inertia(1.0, (0.05, 0.05, 0.15)).tolist(),
                      "com_offset": [0.0, 0.0, 0.1]})
        joints.append({"kind": "spherical",
                       "parent": "root" if i == 0 else f"seg{i - 1}",
                       "child": f"seg{i}",
                       "origin": {"translation": [0.0, 0.0, 0.25]}})
    return build_tree({"links": links, "joints": joints})


def random_tree(rng, n_bodies):
    """Random branching tree: free root, then spherical/revolute joints,
    box inertias, small COM offsets."""
    links = []
    joints = []
    for i in range(n_bodies):
        name = f"link{i}"
        mass = float(rng.uniform(0.5, 4.0))
        half = rng.uniform(0.05, 0.3, 3)
        links.append({"name": name, "mass": mass,
                      "inertia": box_inertia(mass, half).tolist(),
                      "com_offset": rng.uniform(-0.1, 0.1, 3).tolist()})
        if i == 0:
            joints.append({"kind": "free", "parent": "world", "child": name})
            continue
        parent = f"link{int(rng.integers(i))}"
        kind = str(rng.choice(["spherical", "revolute"]))
        joint = {
            "kind": kind, "parent": parent, "child": name,
            "origin": {"rotation": (rng.uniform(-1, 1, 3) * 0.8).tolist(),
                       "translation": rng.uniform(-0.4, 0.4, 3).tolist()},
        }
        if kind == "revolute":
            axis = rng.normal(size=3)
            joint["axis"] = (axis / np.linalg.norm(axis)).tolist()
        joints.append(joint)
    return build_tree({"links": links, "joints": joints})


def random_state(rng, tree, scale=1.0):
    q = rng.uniform(-1.0, 1.0, tree.dof) * scale   # rotations stay inside pi
    qd = rng.normal(size=tree.dof)
    qdd = rng.normal(size=tree.dof)
    return q, qd, qdd


def make_state(p, pdot, x, n, x_velocity=(0, 0, 0), pddot=None, obj_acc=None,
               signed_distance=0.0):
    query = SurfaceQuery(x=np.asarray(x, float), n=np.asarray(n, float),
                         signed_distance=signed_distance,
                         x_velocity=np.asarray(x_velocity, float))
    return ContactPointState(
        p=np.asarray(p, float), pdot=np.asarray(pdot, float), query=query,
        pddot=None if pddot is None else np.asarray(pddot, float),
        object_acceleration=None if obj_acc is None else np.asarray(obj_acc, float))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
