import numpy as np
import pytest

from contactdyn.dynamics import (bias_and_gravity, coupled_residual,
                                 dynamics_terms, human_residual,
                                 inverse_dynamics, mass_matrix,
                                 object_residual)
from contactdyn.errors import DimensionError
from contactdyn.model import RigidObjectModel, box_inertia
from contactdyn.surfaces import BoxShape
from conftest import (humanoid_tree, pendulum_tree, random_state, random_tree,
                      single_box_tree)

G = np.array([0.0, 0.0, -9.81])


def test_gravity_hold_point_mass():
    """Holding a 1 kg body against gravity needs +9.81 N vertically."""
    tree = single_box_tree(mass=1.0)
    tau = inverse_dynamics(tree, np.zeros(6), np.zeros(6), np.zeros(6), G)
    assert np.allclose(tau[3:], (0.0, 0.0, 9.81), atol=1e-12)


def test_pendulum_hanging_equilibrium():
    tree = pendulum_tree()
    z = np.zeros(tree.dof)
    tau = inverse_dynamics(tree, z, z, z, G)
    assert abs(tau[6]) < 1e-12


def test_pendulum_horizontal_torque():
    tree = pendulum_tree(mass=1.0, length=1.0)
    q = np.zeros(tree.dof)
    q[6] = np.pi / 2
    tau = inverse_dynamics(tree, q, np.zeros(tree.dof), np.zeros(tree.dof), G)
    assert abs(abs(tau[6]) - 9.81) < 1e-9


def test_pendulum_mass_matrix_entry():
    tree = pendulum_tree(mass=1.0, length=1.0)
    q = np.zeros(tree.dof)
    q[6] = 0.7
    M = mass_matrix(tree, q)
    assert abs(M[6, 6] - 1.0) < 1e-12


def test_point_mass_translational_block():
    tree = single_box_tree(mass=2.0, half=0.2)
    M = mass_matrix(tree, np.zeros(6))
    assert np.allclose(M[3:, 3:], 2.0 * np.eye(3), atol=1e-12)


def test_bias_zero_at_rest(rng):
    tree = random_tree(rng, 5)
    q, _, _ = random_state(rng, tree)
    C, G_vec = bias_and_gravity(tree, q, np.zeros(tree.dof), G)
    assert np.allclose(C, 0.0, atol=1e-12)
    C2, G_zero = bias_and_gravity(tree, q, np.zeros(tree.dof), np.zeros(3))
    assert np.allclose(G_zero, 0.0, atol=1e-12)


def test_pendulum_centripetal_reaction():
    """Spinning at omega: the pivot must supply m l omega^2 toward itself,
    and the revolute bias vanishes (the analytic m l^2 model has C = 0)."""
    tree = pendulum_tree()
    qd = np.zeros(tree.dof)
    qd[6] = 2.0
    C, _ = bias_and_gravity(tree, np.zeros(tree.dof), qd, G)
    assert np.allclose(C[3:6], (0.0, 0.0, 4.0), atol=1e-12)
    assert abs(C[6]) < 1e-12


def test_crba_rnea_consistency(rng):
    for _ in range(10):
        tree = random_tree(rng, int(rng.integers(2, 12)))
        q, qd, qdd = random_state(rng, tree)
        terms = dynamics_terms(tree, q, qd, G)
        lhs = terms.M @ qdd + terms.C + terms.G
        rhs = inverse_dynamics(tree, q, qd, qdd, G)
        scale = max(1.0, np.abs(rhs).max())
        assert np.abs(lhs - rhs).max() <= 1e-8 * scale


def test_mass_matrix_symmetric_pd(rng):
    for _ in range(10):
        tree = random_tree(rng, int(rng.integers(2, 10)))
        q, _, _ = random_state(rng, tree)
        M = mass_matrix(tree, q)
        assert np.abs(M - M.T).max() <= 1e-9 * max(np.abs(M).max(), 1.0)
        np.linalg.cholesky(M)


def test_mass_matrix_psd_with_zero_mass_links():
    """Composite aggregation keeps M positive semidefinite even when some
    links carry no inertia (massless base of the pendulum)."""
    tree = pendulum_tree()
    for angle in (0.0, 0.4, 1.3):
        q = np.zeros(tree.dof)
        q[6] = angle
        M = mass_matrix(tree, q)
        assert np.linalg.eigvalsh(M).min() >= -1e-9


def test_mass_matrix_matches_unit_qdd_columns(rng):
    tree = random_tree(rng, 5)
    q, _, _ = random_state(rng, tree)
    M = mass_matrix(tree, q)
    zero = np.zeros(tree.dof)
    for i in range(tree.dof):
        e = np.zeros(tree.dof)
        e[i] = 1.0
        col = inverse_dynamics(tree, q, zero, e, np.zeros(3))
        assert np.allclose(M[:, i], col, atol=1e-9 * max(1.0, np.abs(M).max()))


def test_human_residual_free_fall():
    tree = single_box_tree()
    qdd = np.zeros(6)
    qdd[3:] = G
    r = human_residual(tree, np.zeros(6), np.zeros(6), qdd, np.zeros(6), gravity=G)
    assert np.allclose(r, 0.0, atol=1e-12)


def test_human_residual_supported_block():
    """1 kg block at rest with a planted (0, 0, 9.81) N force at its COM."""
    tree = single_box_tree(mass=1.0)
    J = np.zeros((3, 6))
    J[:, 3:] = np.eye(3)
    lam = np.array([0.0, 0.0, 9.81])
    z = np.zeros(6)
    r = human_residual(tree, z, z, z, z, scene_contacts=[(J, lam)], gravity=G)
    assert np.allclose(r, 0.0, atol=1e-12)
    r_unsupported = human_residual(tree, z, z, z, z, gravity=G)
    assert abs(np.abs(r_unsupported).sum() - 9.81) < 1e-12


def test_residual_affine_in_inputs(rng):
    tree = random_tree(rng, 4)
    q, qd, qdd = random_state(rng, tree)
    tau = rng.normal(size=tree.dof)
    J1 = rng.normal(size=(3, tree.dof))
    lam1 = rng.normal(size=3)
    base = human_residual(tree, q, qd, qdd, tau, scene_contacts=[(J1, lam1)], gravity=G)
    dtau = rng.normal(size=tree.dof)
    shifted = human_residual(tree, q, qd, qdd, tau + dtau,
                             scene_contacts=[(J1, lam1)], gravity=G)
    assert np.allclose(shifted - base, -dtau, atol=1e-12)
    dlam = rng.normal(size=3)
    shifted = human_residual(tree, q, qd, qdd, tau,
                             scene_contacts=[(J1, lam1 + dlam)], gravity=G)
    assert np.allclose(shifted - base, -(J1.T @ dlam), atol=1e-12)


def test_object_residual_free_fall_and_statics():
    obj = RigidObjectModel(mass=2.0, inertia=box_inertia(2.0, (0.1, 0.1, 0.1)),
                           geometry=BoxShape((0.1, 0.1, 0.1)))
    ot = obj.as_tree()
    z = np.zeros(6)
    qdd = np.zeros(6)
    qdd[3:] = G
    assert np.allclose(object_residual(ot, z, z, qdd, gravity=G), 0.0, atol=1e-12)

    # Held statically by one force through the COM: the force the object
    # exerts on the hand is downward, so the hand-side lam is -19.62 z.
    J = np.zeros((3, 6))
    J[:, 3:] = np.eye(3)
    lam = np.array([0.0, 0.0, -19.62])
    r = object_residual(ot, z, z, z, hand_contacts=[(J, lam)], gravity=G)
    assert np.allclose(r, 0.0, atol=1e-12)
    r_half = object_residual(ot, z, z, z, hand_contacts=[(J, lam / 2)], gravity=G)
    assert abs(np.abs(r_half).sum() - 9.81) < 1e-12


def test_newtons_third_law_perturbation(rng):
    """Perturbing lam by delta moves the two residuals by exactly
    -J_h^T delta and +J_o^T delta."""
    tree = random_tree(rng, 3)
    obj = RigidObjectModel(mass=1.0, inertia=box_inertia(1.0, (0.1,) * 3),
                           geometry=BoxShape((0.1,) * 3))
    ot = obj.as_tree()
    q, qd, qdd = random_state(rng, tree)
    qo, qdo, qddo = random_state(rng, ot)
    tau = rng.normal(size=tree.dof)
    Jh = rng.normal(size=(3, tree.dof))
    Jo = rng.normal(size=(3, 6))
    lam = rng.normal(size=3)
    delta = rng.normal(size=3)
    rh0 = human_residual(tree, q, qd, qdd, tau, object_contacts=[(Jh, lam)], gravity=G)
    ro0 = object_residual(ot, qo, qdo, qddo, hand_contacts=[(Jo, lam)], gravity=G)
    rh1 = human_residual(tree, q, qd, qdd, tau, object_contacts=[(Jh, lam + delta)], gravity=G)
    ro1 = object_residual(ot, qo, qdo, qddo, hand_contacts=[(Jo, lam + delta)], gravity=G)
    assert np.abs((rh1 - rh0) + Jh.T @ delta).max() < 1e-12
    assert np.abs((ro1 - ro0) - Jo.T @ delta).max() < 1e-12
    # Flipping lam flips both contributions.
    rh_neg = human_residual(tree, q, qd, qdd, tau, object_contacts=[(Jh, -lam)], gravity=G)
    assert np.allclose((rh_neg - rh0), 2 * (Jh.T @ lam), atol=1e-12)


def test_coupled_residual_composed_statics():
    """Human holds the object; planted forces balance both equations."""
    tree = single_box_tree(mass=1.0)
    obj = RigidObjectModel(mass=2.0, inertia=box_inertia(2.0, (0.1,) * 3),
                           geometry=BoxShape((0.1,) * 3))
    ot = obj.as_tree()
    T = 3
    z6 = np.zeros((T, 6))
    J_com = np.zeros((3, 6))
    J_com[:, 3:] = np.eye(3)
    # Object pushes hand down with its weight; scene pushes human up with
    # the combined weight; human torque zero.
    lam_obj = np.tile((0.0, 0.0, -19.62), (T, 1, 1))
    lam_scene = np.tile((0.0, 0.0, 9.81 + 19.62), (T, 1, 1))
    report = coupled_residual(
        tree, ot,
        human_frames=(z6, z6, z6), object_frames=(z6, z6, z6),
        tau=z6,
        scene_forces=lam_scene, object_forces=lam_obj,
        scene_jacobians=[[J_com]] * T,
        object_jacobians_human=[[J_com]] * T,
        object_jacobians_object=[[J_com]] * T,
        gravity=G,
    )
    assert report.aggregate <= 1e-6
    assert np.allclose(report.frame_norms, report.frame_norms_h + report.frame_norms_o)


def test_coupled_residual_empty_contacts():
    tree = single_box_tree()
    T = 3
    z6 = np.zeros((T, 6))
    report = coupled_residual(tree, None, (z6, z6, z6), None, z6,
                              None, None, None, None, None, gravity=G)
    assert np.allclose(report.frame_norms_o, 0.0)
    assert abs(report.aggregate - T * 9.81) < 1e-9


def test_dimension_errors():
    tree = single_box_tree()
    with pytest.raises(DimensionError):
        inverse_dynamics(tree, np.zeros(5), np.zeros(6), np.zeros(6))
    with pytest.raises(DimensionError):
        human_residual(tree, np.zeros(6), np.zeros(6), np.zeros(6), np.zeros(6),
                       scene_contacts=[(np.zeros((3, 5)), np.zeros(3))])


def test_humanoid_75_dof_consistency(rng):
    tree = humanoid_tree()
    q, qd, qdd = random_state(rng, tree, scale=0.5)
    terms = dynamics_terms(tree, q, qd, G)
    rhs = inverse_dynamics(tree, q, qd, qdd, G)
    assert np.abs(terms.M @ qdd + terms.C + terms.G - rhs).max() <= 1e-8 * np.abs(rhs).max()
    np.linalg.cholesky(terms.M)
