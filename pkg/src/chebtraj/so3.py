"""Rotation-vector (exponential coordinate) utilities for SO(3).

Rotations are stored as 3-vectors theta with R = exp([theta]_x); the chart
is valid for ||theta|| < pi.  Body angular rate omega relates to the chart
velocity through the inverse right Jacobian: thetadot = Jr(theta)^-1 omega.
Closed forms are used away from zero, 4th-order series below SMALL_ANGLE.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "hat",
    "exp_so3",
    "log_so3",
    "right_jacobian",
    "right_jacobian_inv",
    "rotvec_rate",
    "rotvec_rate_jacobian",
]

SMALL_ANGLE = 1e-4


def hat(v: np.ndarray) -> np.ndarray:
    """Skew matrix [v]_x with [v]_x @ w = v x w."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def exp_so3(theta: np.ndarray) -> np.ndarray:
    """Rotation matrix exp([theta]_x) by the Rodrigues formula."""
    theta = np.asarray(theta, dtype=float)
    phi = float(np.linalg.norm(theta))
    K = hat(theta)
    if phi < SMALL_ANGLE:
        a = 1.0 - phi**2 / 6.0 + phi**4 / 120.0
        b = 0.5 - phi**2 / 24.0 + phi**4 / 720.0
    else:
        a = np.sin(phi) / phi
        b = (1.0 - np.cos(phi)) / phi**2
    return np.eye(3) + a * K + b * (K @ K)


def log_so3(R: np.ndarray) -> np.ndarray:
    """Rotation vector of R, with angle in [0, pi]."""
    cos_phi = np.clip((np.trace(R) - 1.0) * 0.5, -1.0, 1.0)
    phi = float(np.arccos(cos_phi))
    axial = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if phi < SMALL_ANGLE:
        return axial * (1.0 + phi**2 / 6.0)
    if np.pi - phi < 1e-6:
        # Near pi the axial part degenerates; take the axis from R + I.
        B = 0.5 * (R + np.eye(3))
        axis = np.sqrt(np.clip(np.diag(B), 0.0, None))
        k = int(np.argmax(axis))
        axis = B[:, k] / max(axis[k], 1e-12)
        axis /= np.linalg.norm(axis)
        if np.dot(axis, axial) < 0:
            axis = -axis
        return phi * axis
    return axial * (phi / np.sin(phi))


def right_jacobian(theta: np.ndarray) -> np.ndarray:
    """Right Jacobian Jr with exp(theta + d) ~ exp(theta) exp(Jr d)."""
    theta = np.asarray(theta, dtype=float)
    phi = float(np.linalg.norm(theta))
    K = hat(theta)
    if phi < SMALL_ANGLE:
        a = 0.5 - phi**2 / 24.0
        b = 1.0 / 6.0 - phi**2 / 120.0
    else:
        a = (1.0 - np.cos(phi)) / phi**2
        b = (phi - np.sin(phi)) / phi**3
    return np.eye(3) - a * K + b * (K @ K)


def _jrinv_coeff(phi: float) -> float:
    """Coefficient g(phi) of [theta]_x^2 in Jr^-1 = I + K/2 + g K^2."""
    if phi < SMALL_ANGLE:
        return 1.0 / 12.0 + phi**2 / 720.0
    return 1.0 / phi**2 - (1.0 + np.cos(phi)) / (2.0 * phi * np.sin(phi))


def _jrinv_coeff_deriv(phi: float) -> float:
    """d g(phi) / d phi."""
    if phi < SMALL_ANGLE:
        return phi / 360.0
    s, c = np.sin(phi), np.cos(phi)
    return -2.0 / phi**3 + (phi * s**2 + (1.0 + c) * (s + phi * c)) / (
        2.0 * phi**2 * s**2
    )


def right_jacobian_inv(theta: np.ndarray) -> np.ndarray:
    """Inverse right Jacobian; maps body rate to rotation-vector rate."""
    theta = np.asarray(theta, dtype=float)
    phi = float(np.linalg.norm(theta))
    K = hat(theta)
    return np.eye(3) + 0.5 * K + _jrinv_coeff(phi) * (K @ K)


def rotvec_rate(theta: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Chart velocity thetadot = Jr(theta)^-1 omega."""
    return right_jacobian_inv(theta) @ np.asarray(omega, dtype=float)


def rotvec_rate_jacobian(theta: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Partial of Jr(theta)^-1 omega with respect to theta (3x3).

    With K = [theta]_x and Jr^-1 = I + K/2 + g(phi) K^2:
      d(K w)/dtheta          = -[w]_x
      d(K^2 w)/dtheta        = -([K w]_x + K [w]_x)
      d(g)/dtheta            = g'(phi) theta^T / phi
    """
    theta = np.asarray(theta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    phi = float(np.linalg.norm(theta))
    K = hat(theta)
    Kw = K @ omega
    J = -0.5 * hat(omega) - _jrinv_coeff(phi) * (hat(Kw) + K @ hat(omega))
    if phi >= SMALL_ANGLE:
        J += np.outer(K @ Kw, theta) * (_jrinv_coeff_deriv(phi) / phi)
    elif phi > 0.0:
        # g'(phi)/phi -> 1/360 as phi -> 0.
        J += np.outer(K @ Kw, theta) / 360.0
    return J
