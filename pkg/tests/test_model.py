import numpy as np
import pytest

from contactdyn.errors import CycleError, DomainError, InertiaError, RootError
from contactdyn.kinematics import forward_kinematics
from contactdyn.model import RigidObjectModel, box_inertia, build_tree
from conftest import humanoid_tree, random_tree, single_box_tree


def test_single_free_box_dof():
    tree = single_box_tree()
    assert tree.dof == 6
    assert [j.kind for j in tree.joints] == ["free"]


def test_humanoid_dof_is_75():
    tree = humanoid_tree(23)
    assert tree.dof == 75
    assert len(tree.links) == 24


def test_self_loop_is_cycle_error():
    with pytest.raises(CycleError):
        build_tree({
            "links": [{"name": "a", "mass": 1.0, "inertia": np.eye(3).tolist()}],
            "joints": [{"kind": "free", "parent": "a", "child": "a"}],
        })


def test_two_parent_joints_rejected():
    spec = {
        "links": [{"name": "a", "mass": 1.0, "inertia": np.eye(3).tolist()},
                  {"name": "b", "mass": 1.0, "inertia": np.eye(3).tolist()}],
        "joints": [
            {"kind": "free", "parent": "world", "child": "a"},
            {"kind": "spherical", "parent": "a", "child": "b"},
            {"kind": "spherical", "parent": "a", "child": "b"},
        ],
    }
    with pytest.raises(CycleError):
        build_tree(spec)


def test_root_must_be_free():
    spec = {
        "links": [{"name": "a", "mass": 1.0, "inertia": np.eye(3).tolist()}],
        "joints": [{"kind": "spherical", "parent": "world", "child": "a"}],
    }
    with pytest.raises(RootError):
        build_tree(spec)


def test_multiple_roots_rejected():
    spec = {
        "links": [{"name": "a", "mass": 1.0, "inertia": np.eye(3).tolist()},
                  {"name": "b", "mass": 1.0, "inertia": np.eye(3).tolist()}],
        "joints": [{"kind": "free", "parent": "world", "child": "a"},
                   {"kind": "free", "parent": "world", "child": "b"}],
    }
    with pytest.raises(RootError):
        build_tree(spec)


def test_inertia_validation():
    bad = np.diag([1.0, 1.0, 5.0])   # violates Ixx + Iyy >= Izz
    with pytest.raises(InertiaError):
        build_tree({
            "links": [{"name": "a", "mass": 1.0, "inertia": bad.tolist()}],
            "joints": [{"kind": "free", "parent": "world", "child": "a"}],
        })
    asym = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    with pytest.raises(InertiaError):
        build_tree({
            "links": [{"name": "a", "mass": 1.0, "inertia": asym}],
            "joints": [{"kind": "free", "parent": "world", "child": "a"}],
        })


def test_non_unit_revolute_axis_rejected():
    spec = {
        "links": [{"name": "a", "mass": 1.0, "inertia": np.eye(3).tolist()},
                  {"name": "b", "mass": 1.0, "inertia": np.eye(3).tolist()}],
        "joints": [{"kind": "free", "parent": "world", "child": "a"},
                   {"kind": "revolute", "parent": "a", "child": "b",
                    "axis": [0, 0, 2.0]}],
    }
    with pytest.raises(DomainError):
        build_tree(spec)


def test_box_inertia_unit_cube():
    # From I_xx = m (b^2 + c^2) / 3 with half extents b = c = 0.5.
    I = box_inertia(1.0, (0.5, 0.5, 0.5))
    assert np.allclose(I, np.eye(3) / 6.0, atol=1e-15)


def test_box_inertia_zero_mass():
    assert np.allclose(box_inertia(0.0, (0.2, 0.3, 0.4)), np.zeros((3, 3)))


def test_box_inertia_degenerate_plate_is_psd():
    I = box_inertia(2.0, (0.3, 0.2, 0.0))
    assert np.all(np.linalg.eigvalsh(I) >= 0.0)
    # Valid as a link inertia (triangle inequality holds for a plate).
    build_tree({
        "links": [{"name": "a", "mass": 2.0, "inertia": I.tolist()}],
        "joints": [{"kind": "free", "parent": "world", "child": "a"}],
    })


def test_box_inertia_rejects_negative():
    with pytest.raises(DomainError):
        box_inertia(-1.0, (0.1, 0.1, 0.1))
    with pytest.raises(DomainError):
        box_inertia(1.0, (0.1, -0.1, 0.1))


def test_fk_at_zero_reproduces_origins(rng):
    """With q = 0 every joint transform is the identity, so link poses are
    the composed origin transforms."""
    for k in range(5):
        tree = random_tree(rng, int(rng.integers(2, 10)))
        fk = forward_kinematics(tree, np.zeros(tree.dof))
        for i, joint in enumerate(tree.joints):
            p = tree.parent_index[i]
            if p < 0:
                R_p, o_p = np.eye(3), np.zeros(3)
            else:
                R_p, o_p = fk.link_rot[p], fk.link_pos[p]
            c = tree.child_index[i]
            assert np.allclose(fk.link_rot[c], R_p @ joint.origin_rotation, atol=1e-14)
            assert np.allclose(fk.link_pos[c], o_p + R_p @ joint.origin_translation,
                               atol=1e-14)


def test_dof_bookkeeping_rejected_everywhere():
    from contactdyn.errors import DimensionError

    tree = single_box_tree()
    with pytest.raises(DimensionError):
        forward_kinematics(tree, np.zeros(5))
    with pytest.raises(DimensionError):
        forward_kinematics(tree, np.full(6, np.nan))


def test_object_model_as_tree():
    obj = RigidObjectModel(mass=2.0, inertia=box_inertia(2.0, (0.1, 0.1, 0.1)))
    tree = obj.as_tree()
    assert tree.dof == 6
    assert tree.links[0].mass == 2.0
