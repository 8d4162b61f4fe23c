import numpy as np
import pytest

from contactdyn.errors import DimensionError, TooShortError, UnknownBodyError
from contactdyn.kinematics import (Trajectory, differentiate,
                                   differentiate_series, forward_kinematics,
                                   point_jacobian, point_position)
from conftest import random_state, random_tree, single_box_tree, two_link_planar


def test_fk_identity_at_zero():
    tree = single_box_tree()
    fk = forward_kinematics(tree, np.zeros(6))
    assert np.allclose(fk.link_rot[0], np.eye(3))
    assert np.allclose(fk.link_pos[0], np.zeros(3))


def test_fk_pure_translation():
    tree = single_box_tree()
    q = np.zeros(6)
    q[3:] = (1.0, 2.0, 3.0)
    fk = forward_kinematics(tree, q)
    assert np.allclose(fk.link_pos[0], (1.0, 2.0, 3.0))
    assert np.allclose(fk.link_rot[0], np.eye(3))


def test_two_link_planar_tip():
    """Both angles pi/2 about z, unit links along x: the tip lands at
    Rz(pi/2) x_hat + Rz(pi) x_hat = (-1, 1, 0)."""
    tree = two_link_planar()
    q = np.zeros(tree.dof)
    q[6] = np.pi / 2
    q[7] = np.pi / 2
    tip = point_position(tree, q, "b", (1.0, 0.0, 0.0))
    assert np.allclose(tip, (-1.0, 1.0, 0.0), atol=1e-12)


def test_point_position_unknown_body():
    tree = single_box_tree()
    with pytest.raises(UnknownBodyError):
        point_position(tree, np.zeros(6), "nope", (0, 0, 0))


def test_point_position_matches_fk(rng):
    tree = random_tree(rng, 6)
    q, _, _ = random_state(rng, tree)
    body = tree.links[4].name
    offset = rng.normal(size=3) * 0.2
    fk = forward_kinematics(tree, q)
    li = tree.link_id(body)
    expected = fk.link_rot[li] @ offset + fk.link_pos[li]
    assert np.allclose(point_position(tree, q, body, offset), expected)


def test_jacobian_translation_block_identity():
    tree = single_box_tree()
    J = point_jacobian(tree, np.zeros(6), "box", (0.2, -0.1, 0.4))
    assert np.allclose(J[:, 3:6], np.eye(3))


def test_jacobian_revolute_textbook():
    """Single revolute joint: the column is axis x r."""
    tree = two_link_planar()
    q = np.zeros(tree.dof)
    J = point_jacobian(tree, q, "a", (1.0, 0.0, 0.0))
    # Joint 'a' rotates about z through the origin; point at (1, 0, 0).
    assert np.allclose(J[:, 6], np.cross([0, 0, 1.0], [1.0, 0, 0]), atol=1e-12)


def test_jacobian_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(10):
        tree = random_tree(rng, int(rng.integers(2, 8)))
        q, _, _ = random_state(rng, tree)
        body = tree.links[int(rng.integers(len(tree.links)))].name
        offset = rng.normal(size=3) * 0.3
        J = point_jacobian(tree, q, body, offset)
        for i in range(tree.dof):
            qp = q.copy(); qp[i] += h
            qm = q.copy(); qm[i] -= h
            col = (point_position(tree, qp, body, offset)
                   - point_position(tree, qm, body, offset)) / (2 * h)
            assert np.allclose(J[:, i], col, atol=1e-5)


def test_jacobian_chain_locality(rng):
    """DOFs of a sibling branch never move the queried point."""
    from contactdyn.model import box_inertia, build_tree

    links = [{"name": "root", "mass": 1.0, "inertia": box_inertia(1, (0.1,) * 3).tolist()}]
    joints = [{"kind": "free", "parent": "world", "child": "root"}]
    for branch in ("a", "b"):
        for i in range(2):
            links.append({"name": f"{branch}{i}", "mass": 1.0,
                          "inertia": box_inertia(1, (0.1,) * 3).tolist()})
            joints.append({"kind": "spherical",
                           "parent": "root" if i == 0 else f"{branch}0",
                           "child": f"{branch}{i}",
                           "origin": {"translation": [0.3, 0, 0]}})
    tree = build_tree({"links": links, "joints": joints})
    q, _, _ = random_state(rng, tree)
    J = point_jacobian(tree, q, "a1", (0.1, 0.2, 0.0))
    for i, joint in enumerate(tree.joints):
        if joint.child.startswith("b"):
            start, stop = tree.q_slices[i]
            assert np.allclose(J[:, start:stop], 0.0)


def test_differentiate_constant():
    traj = differentiate(Trajectory(dt=0.1, q=np.ones((5, 3)) * 2.0))
    assert np.allclose(traj.qd, 0.0)
    assert np.allclose(traj.qdd, 0.0)


def test_differentiate_linear_exact():
    dt = 0.05
    t = np.arange(6)[:, None] * dt
    v = np.array([1.0, -2.0, 0.5])
    traj = differentiate(Trajectory(dt=dt, q=t * v))
    assert np.allclose(traj.qd, np.tile(v, (6, 1)), atol=1e-12)
    assert np.allclose(traj.qdd, 0.0, atol=1e-9)


def test_differentiate_quadratic_exact():
    """Central and one-sided second-order stencils are exact on quadratics."""
    dt = 0.02
    a = np.array([3.0, -1.0])
    t = np.arange(7)[:, None] * dt
    traj = differentiate(Trajectory(dt=dt, q=0.5 * a * t * t))
    assert np.allclose(traj.qdd, np.tile(a, (7, 1)), atol=1e-9)
    assert np.allclose(traj.qd, a * t, atol=1e-9)


def test_differentiate_too_short():
    with pytest.raises(TooShortError):
        differentiate(Trajectory(dt=0.1, q=np.zeros((2, 3))))


def test_differentiate_linearity(rng):
    dt = 0.01
    X = rng.normal(size=(9, 4))
    Y = rng.normal(size=(9, 4))
    a, b = 2.5, -1.25
    combo = differentiate(Trajectory(dt=dt, q=a * X + b * Y))
    dX = differentiate(Trajectory(dt=dt, q=X))
    dY = differentiate(Trajectory(dt=dt, q=Y))
    assert np.allclose(combo.qd, a * dX.qd + b * dY.qd, atol=1e-9)
    assert np.allclose(combo.qdd, a * dX.qdd + b * dY.qdd, atol=1e-7)


def test_differentiate_unwraps_rotations():
    """A rotation sequence crossing the pi ball must not spike."""
    tree = single_box_tree()
    dt = 0.01
    T = 30
    q = np.zeros((T, 6))
    for t in range(T):
        angle = 3.0 + 0.02 * t          # crosses pi at ~ t = 7
        vec = np.array([0.0, 0.0, angle])
        if angle > np.pi:
            vec = np.array([0.0, 0.0, angle - 2 * np.pi])
        q[t, :3] = vec
    traj = differentiate(Trajectory(dt=dt, q=q), tree=tree)
    assert np.all(np.abs(traj.qd[:, 2] - 2.0) < 1e-6)


def test_differentiate_series_matches_trajectory(rng):
    dt = 0.03
    q = rng.normal(size=(8, 5))
    traj = differentiate(Trajectory(dt=dt, q=q))
    d, dd = differentiate_series(q, dt)
    assert np.allclose(d, traj.qd)
    assert np.allclose(dd, traj.qdd)


def test_trajectory_validation():
    with pytest.raises(DimensionError):
        Trajectory(dt=0.0, q=np.zeros((4, 3)))
    with pytest.raises(DimensionError):
        Trajectory(dt=0.1, q=np.zeros(4))
