"""Continuous contact force model.

A candidate point p near a surface point x (normal n) feels a force that
is switched on smoothly by two sigmoids, one in the distance ||p - x|| and
one in the signed offset (p - x) . n, and is composed of a damped-spring
normal force plus static and kinetic friction:

    lam(p) = gate * (f_perp + f_s + f_k)

    f_perp = (-kappa (s - d0) - delta (reldot . n)) n
    f_s    = h(-gamma (||reldot|| - v0)) rho | ||rel_par|| - d0 | d_par
    f_k    = -mu ||f_perp|| reldot_par / max(||reldot_par||, eps)

The tangential direction d_par depends on the scenario: against a static
scene it follows the point's tangential acceleration (friction propels the
body); against a moving object it opposes the object's non-gravitational
acceleration (the hand drives the object).  The kinetic term is regularized
below the sliding speed eps so the whole force stays continuous and
differentiable, which the recovery solver relies on.

Everything here is a pure function; the affine decomposition
`contact_force_affine` is the single code path.  Both direct evaluation
and the solver's gradients plug coefficients into it, so the two can
never drift apart.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CoefficientError, DomainError, ModeError, NormError

STATIC_SCENE = "static_scene"
MOVING_OBJECT = "moving_object"

GRAVITY = np.array([0.0, 0.0, -9.81])


def sigmoid(x):
    """Numerically stable logistic h(x) = 1 / (1 + exp(-x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ContactModelConfig:
    """Gate sharpness, buffers, and regularization thresholds.

    Units follow from the sigmoid arguments being dimensionless:
    alpha, beta in 1/m, gamma in s/m, buffers in m, v0 and eps in m/s.
    """

    alpha: float = 200.0
    beta: float = 200.0
    gamma: float = 20.0
    d0: float = 0.02
    d1: float = 0.01
    v0: float = 0.05
    eps: float = 1e-4
    strict_normal: bool = False   # keep the unsigned |rel . n| spring arm under penetration

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.gamma <= 0:
            raise DomainError("gate sharpness parameters must be positive")
        if self.d0 < 0 or self.d1 < 0:
            raise DomainError("contact buffers must be nonnegative")
        if self.v0 <= 0 or self.eps <= 0:
            raise DomainError("speed thresholds must be positive")


@dataclass(frozen=True)
class ContactCoefficients:
    """Per-point, per-frame coefficient tensors.

    `scene` is T x C_s x 4 and `hand` is T x C_o x 4, both in
    (kappa, delta, rho, mu) order, all entries nonnegative.
    """

    scene: np.ndarray
    hand: np.ndarray

    def __post_init__(self):
        for name in ("scene", "hand"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.size and (arr.ndim != 3 or arr.shape[2] != 4):
                raise CoefficientError(f"{name} coefficients must be T x C x 4")
            if arr.size and arr.min() < 0.0:
                raise CoefficientError(f"{name} coefficients must be nonnegative")
            object.__setattr__(self, name, arr)


@dataclass
class ContactPointState:
    """Kinematic state of one candidate contact point at one frame.

    Scene mode populates `pddot` (the point's acceleration); object mode
    populates `object_acceleration` instead.
    """

    p: np.ndarray
    pdot: np.ndarray
    query: object                      # SurfaceQuery
    pddot: np.ndarray = None           # static-scene mode
    object_acceleration: np.ndarray = None  # moving-object mode

    def rel(self):
        return np.asarray(self.p, float) - self.query.x

    def reldot(self):
        return np.asarray(self.pdot, float) - self.query.x_velocity


def _check_unit(n):
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise NormError("normal must be unit length")
    return n


def decompose(rel, n):
    """Split a vector into components along and orthogonal to n."""
    n = _check_unit(n)
    rel = np.asarray(rel, dtype=float)
    perp = (rel @ n) * n
    return perp, rel - perp


def gate(rel, n, config):
    """Soft contact gate in (0, 1): close to the surface and not deeply
    penetrating."""
    n = _check_unit(n)
    rel = np.asarray(rel, dtype=float)
    dist = np.linalg.norm(rel)
    return float(sigmoid(-config.alpha * (dist - config.d0))
                 * sigmoid(config.beta * (rel @ n + config.d1)))


def tangential_direction(mode, state, n, eps, gravity=GRAVITY):
    """Unit static-friction direction in the tangent plane, or None when
    the driving vector is below eps (direction undefined)."""
    n = _check_unit(n)
    if mode == STATIC_SCENE:
        if state.pddot is None:
            raise ModeError("static_scene mode needs the point acceleration")
        driver = np.asarray(state.pddot, dtype=float)
    elif mode == MOVING_OBJECT:
        if state.object_acceleration is None:
            raise ModeError("moving_object mode needs the object acceleration")
        a = np.asarray(state.object_acceleration, dtype=float)
        driver = -(a - np.asarray(gravity, dtype=float))
    else:
        raise ModeError(f"unknown contact mode {mode!r}")
    tangential = driver - (driver @ n) * n
    norm = float(np.linalg.norm(tangential))
    if norm < eps:
        return None
    return tangential / norm


@dataclass
class ContactAffineForm:
    """lam as an explicit function of the coefficients at fixed geometry:

        lam(kappa, delta, rho, mu) =
            gate * ((kappa a + delta b) n + rho s_vec - mu |kappa a + delta b| k_vec)

    This is what the direct evaluator and the solver's analytic gradients
    both consume.
    """

    gate: float
    a: float            # spring arm: d0 - signed normal offset
    b: float            # damping arm: -(reldot . n)
    n: np.ndarray
    s_vec: np.ndarray   # static-friction direction * speed gate * |arm|
    k_vec: np.ndarray   # regularized sliding direction
    slide_speed: float = 0.0  # ||reldot_par||, for nonsmooth-locus checks

    def force(self, kappa, delta, rho, mu):
        if min(kappa, delta, rho, mu) < 0.0:
            raise CoefficientError("contact coefficients must be nonnegative")
        k = kappa * self.a + delta * self.b
        return self.gate * (k * self.n + rho * self.s_vec - mu * abs(k) * self.k_vec)

    def force_jacobian(self, kappa, delta, rho, mu):
        """3 x 4 derivative of the force w.r.t. (kappa, delta, rho, mu)."""
        k = kappa * self.a + delta * self.b
        sg = np.sign(k)
        J = np.empty((3, 4))
        J[:, 0] = self.gate * (self.a * self.n - mu * self.a * sg * self.k_vec)
        J[:, 1] = self.gate * (self.b * self.n - mu * self.b * sg * self.k_vec)
        J[:, 2] = self.gate * self.s_vec
        J[:, 3] = -self.gate * abs(k) * self.k_vec
        return J


def contact_force_affine(state, config, mode, gravity=GRAVITY):
    """Precompute the coefficient-independent geometry of the force law."""
    n = _check_unit(state.query.n)
    rel = state.rel()
    reldot = state.reldot()
    g = gate(rel, n, config)

    offset = float(rel @ n)
    if config.strict_normal or offset >= 0.0:
        arm = abs(offset)
    else:
        # Signed arm under penetration: the unsigned norm cannot tell
        # penetration from separation, which would flip the spring force.
        arm = offset
    a = -(arm - config.d0)
    b = -float(reldot @ n)

    speed = float(np.linalg.norm(reldot))
    speed_gate = float(sigmoid(-config.gamma * (speed - config.v0)))
    _, rel_par = decompose(rel, n)
    d_par = tangential_direction(mode, state, n, config.eps, gravity)
    if d_par is None:
        s_vec = np.zeros(3)
    else:
        s_vec = speed_gate * abs(np.linalg.norm(rel_par) - config.d0) * d_par

    _, slide = decompose(reldot, n)
    slide_speed = float(np.linalg.norm(slide))
    k_vec = slide / max(slide_speed, config.eps)

    return ContactAffineForm(gate=g, a=a, b=b, n=n, s_vec=s_vec, k_vec=k_vec,
                             slide_speed=slide_speed)


def normal_force(state, kappa, delta, config):
    """Ungated damped-spring normal force (kappa, delta >= 0)."""
    if kappa < 0.0 or delta < 0.0:
        raise CoefficientError("kappa and delta must be nonnegative")
    form = contact_force_affine(state, config, STATIC_SCENE, GRAVITY) \
        if state.pddot is not None else \
        contact_force_affine(state, config, MOVING_OBJECT, GRAVITY)
    return (kappa * form.a + delta * form.b) * form.n


def static_friction(state, rho, direction, config):
    """Speed-gated static friction along `direction` (None gives zero)."""
    if rho < 0.0:
        raise CoefficientError("rho must be nonnegative")
    if direction is None:
        return np.zeros(3)
    n = _check_unit(state.query.n)
    reldot = state.reldot()
    speed_gate = float(sigmoid(-config.gamma * (np.linalg.norm(reldot) - config.v0)))
    _, rel_par = decompose(state.rel(), n)
    return speed_gate * rho * abs(np.linalg.norm(rel_par) - config.d0) * np.asarray(direction, float)


def kinetic_friction(state, mu, f_perp, n, eps):
    """Coulomb friction opposing relative sliding, linearly regularized
    below the sliding speed eps."""
    if mu < 0.0:
        raise CoefficientError("mu must be nonnegative")
    n = _check_unit(n)
    _, slide = decompose(state.reldot(), n)
    return -mu * float(np.linalg.norm(f_perp)) * slide / max(float(np.linalg.norm(slide)), eps)


def contact_force(state, coeffs, config, mode, gravity=GRAVITY):
    """Total gated contact force for one point.

    `coeffs` is (kappa, delta, rho, mu).  The force goes to zero
    continuously as the point leaves the contact buffer.
    """
    kappa, delta, rho, mu = (float(c) for c in coeffs)
    return contact_force_affine(state, config, mode, gravity).force(kappa, delta, rho, mu)


def contact_force_parts(state, coeffs, config, mode, gravity=GRAVITY):
    """(total, gated normal, gated static, gated kinetic) for logging."""
    kappa, delta, rho, mu = (float(c) for c in coeffs)
    form = contact_force_affine(state, config, mode, gravity)
    k = kappa * form.a + delta * form.b
    f_n = form.gate * k * form.n
    f_s = form.gate * rho * form.s_vec
    f_k = -form.gate * mu * abs(k) * form.k_vec
    return f_n + f_s + f_k, f_n, f_s, f_k
