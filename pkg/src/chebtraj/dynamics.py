"""Continuous dynamics models f(x, u, t) with analytic Jacobians.

Ships the 12-state quadrotor (X configuration, motors numbered
counter-clockwise from top-left seen from above) and a linear model for
solver tests.  The quadrotor state packs as [position(3), rotation
vector(3), world velocity(3), body angular rate(3)]; controls are the four
motor speeds in rad/s.

Conventions: world frame is z-up with gravity (0, 0, -g); aerodynamic drag
opposes motion, f_d = -k_d ||v|| v with k_d >= 0; rotor gyroscopic moments
and rotational aerodynamic torque are neglected.  Model evaluation accepts
negative motor speeds (thrust is quadratic) so optimizer iterates never
fault; non-negativity is a property of physical inputs, enforced where
scenarios are built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .so3 import exp_so3, hat, right_jacobian, right_jacobian_inv, rotvec_rate_jacobian

__all__ = [
    "QuadrotorParameters",
    "QuadrotorState",
    "QuadrotorModel",
    "LinearModel",
    "quad_force_world",
    "quad_torque_body",
    "quad_derivatives",
    "quad_jacobians",
    "linear_test_model",
    "hover_speed",
    "mixing_matrix",
    "POS",
    "ROT",
    "VEL",
    "RATE",
]

# Packed-state component slices.
POS = slice(0, 3)
ROT = slice(3, 6)
VEL = slice(6, 9)
RATE = slice(9, 12)

STATE_DIM = 12
CONTROL_DIM = 4

# Rotation chart margin for dynamics evaluation.
CHART_LIMIT = np.pi - 1e-6


@dataclass(frozen=True)
class QuadrotorParameters:
    """Mass/inertia/rotor parameters of a 1 kg-class X quadrotor."""

    mass: float = 1.0  # kg
    inertia_diag: tuple[float, float, float] = (0.0049, 0.0049, 0.0069)  # kg m^2
    arm_length: float = 0.17  # m
    thrust_coeff: float = 1.91e-6  # N / (rad/s)^2
    drag_coeff: float = 0.1  # N / (m/s)^2
    torque_ratio: float = 0.013  # m, torque coeff / thrust coeff
    gravity: float = 9.81  # m/s^2

    def __post_init__(self):
        if self.mass <= 0 or self.arm_length <= 0 or self.thrust_coeff <= 0:
            raise ValueError("mass, arm length and thrust coefficient must be > 0")
        if any(i <= 0 for i in self.inertia_diag):
            raise ValueError("inertia diagonal must be > 0")
        if self.drag_coeff < 0:
            raise ValueError("drag coefficient must be >= 0")
        if self.torque_ratio <= 0:
            raise ValueError("torque/thrust ratio must be > 0")

    @property
    def inertia(self) -> np.ndarray:
        return np.diag(self.inertia_diag)


@dataclass(frozen=True)
class QuadrotorState:
    """Unpacked 12-state; pack order [p, theta, v, omega]."""

    position: np.ndarray
    rotation: np.ndarray
    velocity: np.ndarray
    angular_rate: np.ndarray

    def pack(self) -> np.ndarray:
        return np.concatenate(
            [self.position, self.rotation, self.velocity, self.angular_rate]
        ).astype(float)

    @classmethod
    def unpack(cls, x: np.ndarray) -> "QuadrotorState":
        x = np.asarray(x, dtype=float)
        if x.shape != (STATE_DIM,):
            raise ValueError(f"packed quadrotor state must have shape (12,), got {x.shape}")
        return cls(x[POS].copy(), x[ROT].copy(), x[VEL].copy(), x[RATE].copy())


def hover_speed(params: QuadrotorParameters) -> float:
    """Motor speed (rad/s) at which four rotors balance gravity level."""
    return float(np.sqrt(params.mass * params.gravity / (4.0 * params.thrust_coeff)))


def mixing_matrix(params: QuadrotorParameters) -> np.ndarray:
    """Map from per-motor thrusts (N) to body torque (N m)."""
    l, c = params.arm_length, params.torque_ratio
    return np.array(
        [
            [l, l, -l, -l],
            [-l, l, l, -l],
            [-c, c, -c, c],
        ]
    )


def _check_chart(theta: np.ndarray) -> float:
    phi = float(np.linalg.norm(theta))
    if phi >= CHART_LIMIT:
        raise ValueError(
            f"rotation vector norm {phi:.6f} outside the chart (limit {CHART_LIMIT:.6f})"
        )
    return phi


def quad_force_world(x: np.ndarray, u: np.ndarray, params: QuadrotorParameters) -> np.ndarray:
    """Total world-frame force: gravity + body-z thrust + drag."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_chart(x[ROT])
    v = x[VEL]
    body_z = exp_so3(x[ROT])[:, 2]
    thrust = params.thrust_coeff * float(u @ u)
    gravity = np.array([0.0, 0.0, -params.mass * params.gravity])
    drag = -params.drag_coeff * np.linalg.norm(v) * v
    return gravity + thrust * body_z + drag


def quad_torque_body(u: np.ndarray, omega: np.ndarray, params: QuadrotorParameters) -> np.ndarray:
    """Body torque from motor thrusts via the mixing matrix.

    Gyroscopic moments are negligible and rotational aerodynamic drag has no
    model here, so the rotor torque is the whole of it; omega is kept in the
    signature for models that do include rate-dependent terms.
    """
    u = np.asarray(u, dtype=float)
    thrusts = params.thrust_coeff * u * u
    return mixing_matrix(params) @ thrusts


def quad_derivatives(x: np.ndarray, u: np.ndarray, params: QuadrotorParameters) -> np.ndarray:
    """Packed state derivative [v, Jr^-1 omega, F/m, I^-1 (tau - omega x I omega)]."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_chart(x[ROT])
    omega = x[RATE]
    inertia = np.asarray(params.inertia_diag)
    xdot = np.empty(STATE_DIM)
    xdot[POS] = x[VEL]
    xdot[ROT] = right_jacobian_inv(x[ROT]) @ omega
    xdot[VEL] = quad_force_world(x, u, params) / params.mass
    torque = quad_torque_body(u, omega, params)
    xdot[RATE] = (torque - np.cross(omega, inertia * omega)) / inertia
    return xdot


def quad_jacobians(
    x: np.ndarray, u: np.ndarray, params: QuadrotorParameters
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic F = df/dx (12x12) and G = df/du (12x4)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_chart(x[ROT])
    theta, v, omega = x[ROT], x[VEL], x[RATE]
    m, kf = params.mass, params.thrust_coeff
    inertia = np.asarray(params.inertia_diag)
    inertia_inv = 1.0 / inertia

    F = np.zeros((STATE_DIM, STATE_DIM))
    G = np.zeros((STATE_DIM, CONTROL_DIM))

    F[POS, VEL] = np.eye(3)

    F[ROT, ROT] = rotvec_rate_jacobian(theta, omega)
    F[ROT, RATE] = right_jacobian_inv(theta)

    # Thrust direction: d(R e3)/dtheta = -R [e3]_x Jr(theta).
    R = exp_so3(theta)
    thrust = kf * float(u @ u)
    dbodyz_dtheta = -R @ hat(np.array([0.0, 0.0, 1.0])) @ right_jacobian(theta)
    F[VEL, ROT] = (thrust / m) * dbodyz_dtheta
    speed = float(np.linalg.norm(v))
    if speed > 0.0:
        F[VEL, VEL] = -(params.drag_coeff / m) * (speed * np.eye(3) + np.outer(v, v) / speed)
    G[VEL, :] = np.outer(R[:, 2], 2.0 * kf * u) / m

    # Euler equation: d(omega x I omega)/domega = [omega]_x diag(I) - [I omega]_x.
    F[RATE, RATE] = inertia_inv[:, None] * (hat(inertia * omega) - hat(omega) @ np.diag(inertia))
    G[RATE, :] = inertia_inv[:, None] * (mixing_matrix(params) * (2.0 * kf * u)[None, :])

    return F, G


class QuadrotorModel:
    """Dynamics-model interface over the quadrotor equations."""

    state_dim = STATE_DIM
    control_dim = CONTROL_DIM

    def __init__(self, params: QuadrotorParameters | None = None):
        self.params = params or QuadrotorParameters()

    def f(self, x: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
        return quad_derivatives(x, u, self.params)

    def jacobians(self, x: np.ndarray, u: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        return quad_jacobians(x, u, self.params)

    def hover_speed(self) -> float:
        return hover_speed(self.params)


class LinearModel:
    """xdot = A x + B u, exact Jacobians; oracle model for solver tests."""

    def __init__(self, A: np.ndarray, B: np.ndarray):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ValueError("B must have the same row count as A")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("A and B must be finite")
        self.A = A
        self.B = B
        self.state_dim = A.shape[0]
        self.control_dim = B.shape[1]

    def f(self, x: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.asarray(u, dtype=float)

    def jacobians(self, x: np.ndarray, u: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        return self.A.copy(), self.B.copy()


def linear_test_model(A: np.ndarray, B: np.ndarray) -> LinearModel:
    return LinearModel(A, B)
