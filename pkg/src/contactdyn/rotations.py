"""Axis-angle (exponential map) rotation utilities.

Rotational degrees of freedom are stored as axis-angle vectors and their
plain time derivatives.  Converting those parameter rates into angular
velocities requires the SO(3) left Jacobian: for R(t) = exp([phi(t)]x),

    omega_world = J_l(phi) phi_dot,      [omega]x = Rdot R^T

and the angular acceleration needs its time derivative J_l_dot.  Closed
forms below use series expansions near theta = 0 to stay accurate.
"""

import numpy as np

# Below this angle the closed-form coefficients lose digits to cancellation;
# the quartic series is exact to ~1e-15 there.
_SMALL_ANGLE = 1e-3


def skew(v):
    """3x3 matrix [v]x such that [v]x w = v x w."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def exp_so3(phi):
    """Rodrigues formula: rotation matrix for axis-angle vector phi."""
    phi = np.asarray(phi, dtype=float)
    theta2 = float(phi @ phi)
    theta = np.sqrt(theta2)
    K = skew(phi)
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + a * K + b * (K @ K)


def _jl_coeffs(theta):
    """Coefficients (b, c) of J_l = I + b [phi]x + c [phi]x^2."""
    t2 = theta * theta
    if theta < _SMALL_ANGLE:
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        b = (1.0 - np.cos(theta)) / t2
        c = (theta - np.sin(theta)) / (t2 * theta)
    return b, c


def _jl_coeff_rates(theta):
    """(b'(theta)/theta, c'(theta)/theta), finite at theta = 0."""
    t2 = theta * theta
    if theta < _SMALL_ANGLE:
        beta = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0
        gamma = -1.0 / 60.0 + t2 / 1260.0 - t2 * t2 / 60480.0
    else:
        t3 = t2 * theta
        t4 = t2 * t2
        beta = np.sin(theta) / t3 - 2.0 * (1.0 - np.cos(theta)) / t4
        gamma = (1.0 - np.cos(theta)) / t4 - 3.0 * (theta - np.sin(theta)) / (t4 * theta)
    return beta, gamma


def left_jacobian(phi):
    """J_l(phi): maps axis-angle rates to world-frame angular velocity."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    b, c = _jl_coeffs(theta)
    K = skew(phi)
    return np.eye(3) + b * K + c * (K @ K)


def left_jacobian_dot(phi, phidot):
    """Time derivative of J_l along phi(t) with rate phidot."""
    phi = np.asarray(phi, dtype=float)
    phidot = np.asarray(phidot, dtype=float)
    theta = float(np.linalg.norm(phi))
    b, c = _jl_coeffs(theta)
    beta, gamma = _jl_coeff_rates(theta)
    dot = float(phi @ phidot)
    K = skew(phi)
    Kd = skew(phidot)
    K2 = K @ K
    return dot * (beta * K + gamma * K2) + b * Kd + c * (Kd @ K + K @ Kd)


def right_jacobian(phi):
    """J_r(phi) = J_l(phi)^T: maps rates to body-frame angular velocity."""
    return left_jacobian(phi).T


def log_so3(R):
    """Axis-angle vector of a rotation matrix, magnitude in [0, pi]."""
    R = np.asarray(R, dtype=float)
    tr = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(tr))
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-8:
        return 0.5 * w
    if theta > np.pi - 1e-6:
        # sin(theta) ~ 0: recover the axis from R + I = 2 (I + K^2)-ish.
        aa = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diagonal(aa)))
        axis = aa[:, k] / max(np.sqrt(max(aa[k, k], 1e-15)), 1e-15)
        axis = axis / np.linalg.norm(axis)
        if w @ axis < 0.0:
            axis = -axis
        return axis * theta
    return w * (theta / (2.0 * np.sin(theta)))


def wrap_to_ball(phi):
    """Equivalent axis-angle vector with magnitude in [0, pi]."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    if theta <= np.pi or theta == 0.0:
        return phi.copy()
    k = np.floor((theta + np.pi) / (2.0 * np.pi))
    return phi * (theta - 2.0 * np.pi * k) / theta


def lift_near(phi, reference):
    """Representative of the rotation phi closest to `reference`.

    Candidates are phi scaled to theta + 2 pi k; used when differencing
    axis-angle sequences so a wrap does not produce a velocity spike.
    """
    phi = np.asarray(phi, dtype=float)
    reference = np.asarray(reference, dtype=float)
    theta = float(np.linalg.norm(phi))
    if theta == 0.0:
        # Zero rotation also equals 2 pi k about the reference axis.
        ref_theta = float(np.linalg.norm(reference))
        if ref_theta < np.pi:
            return phi.copy()
        axis = reference / ref_theta
        k = np.round(ref_theta / (2.0 * np.pi))
        return axis * (2.0 * np.pi * k)
    best = phi.copy()
    best_d = float(np.linalg.norm(phi - reference))
    for k in (-2, -1, 1, 2):
        cand = phi * (theta + 2.0 * np.pi * k) / theta
        d = float(np.linalg.norm(cand - reference))
        if d < best_d:
            best_d = d
            best = cand
    return best
