"""Measurement models and whitened residuals against pseudo-spectral trajectories.

Each record carries a timestamp, a measurement vector z, an SPD noise
covariance R and a model.  The residual is L^-1 (z - h(x(t), u(t))) with
L the lower Cholesky factor of R; its Jacobian with respect to the stacked
unknowns vec(X), vec(U) is the Kronecker product of the interpolation
weight row with the pointwise model Jacobian.

Three models ship: pinhole landmark projection, direct observation of
state components, and observation of state-derivative components.  Models
may also depend on the interpolated control (the interface passes u), but
no shipped model does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cheb import barycentric_weights, differentiation_matrix
from .dynamics import POS, ROT, STATE_DIM
from .so3 import exp_so3, hat, right_jacobian
from .trajectory import ControlTrajectory, StateTrajectory

__all__ = [
    "CameraRig",
    "MeasurementRecord",
    "CheiralityError",
    "LandmarkProjection",
    "StateSelection",
    "DerivativeSelection",
    "project_landmark",
    "residual",
    "residual_jacobian",
]

MIN_DEPTH = 0.01  # m; landmarks closer than this to the image plane are rejected


class CheiralityError(ValueError):
    """Landmark at or behind the camera's image plane."""


@dataclass(frozen=True)
class CameraRig:
    """Pinhole intrinsics plus the camera pose in the body frame.

    ``rotation`` columns are the camera axes (x right, y down, z forward)
    expressed in body coordinates; ``translation`` is the camera origin in
    the body frame.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3) or np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise ValueError("rig rotation must be orthonormal within 1e-9")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))


def _camera_point(x: np.ndarray, landmark: np.ndarray, rig: CameraRig) -> np.ndarray:
    """World landmark expressed in the camera frame at body state x."""
    body_point = exp_so3(x[ROT]).T @ (landmark - x[POS])
    return rig.rotation.T @ (body_point - rig.translation)


def project_landmark(x: np.ndarray, landmark: np.ndarray, rig: CameraRig) -> np.ndarray:
    """Pixel coordinates of a world point; raises CheiralityError behind the camera."""
    x = np.asarray(x, dtype=float)
    landmark = np.asarray(landmark, dtype=float)
    pc = _camera_point(x, landmark, rig)
    if pc[2] < MIN_DEPTH:
        raise CheiralityError(
            f"landmark depth {pc[2]:.4f} m is behind the near plane ({MIN_DEPTH} m)"
        )
    return np.array(
        [rig.fx * pc[0] / pc[2] + rig.cx, rig.fy * pc[1] / pc[2] + rig.cy]
    )


class MeasurementModel:
    """Pointwise model h(x, u); subclasses set kind/dim and the Jacobians."""

    kind: str
    uses_derivative = False

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def predict(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def state_jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def control_jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray | None:
        """dh/du, or None when the model ignores the control."""
        return None


class LandmarkProjection(MeasurementModel):
    """Pinhole projection of a known world landmark."""

    kind = "landmark_projection"

    def __init__(self, landmark: np.ndarray, rig: CameraRig):
        self.landmark = np.asarray(landmark, dtype=float)
        self.rig = rig

    @property
    def dim(self) -> int:
        return 2

    def predict(self, x, u):
        return project_landmark(x, self.landmark, self.rig)

    def state_jacobian(self, x, u):
        pc = _camera_point(x, self.landmark, self.rig)
        if pc[2] < MIN_DEPTH:
            raise CheiralityError("landmark behind the near plane")
        fx, fy = self.rig.fx, self.rig.fy
        dpix_dpc = np.array(
            [
                [fx / pc[2], 0.0, -fx * pc[0] / pc[2] ** 2],
                [0.0, fy / pc[2], -fy * pc[1] / pc[2] ** 2],
            ]
        )
        Rcb = self.rig.rotation.T
        Rwb = exp_so3(x[ROT])
        body_point = Rwb.T @ (self.landmark - x[POS])
        H = np.zeros((2, STATE_DIM))
        H[:, POS] = dpix_dpc @ (-Rcb @ Rwb.T)
        # R(theta + d)^T p ~ R^T p + [R^T p]_x Jr(theta) d
        H[:, ROT] = dpix_dpc @ (Rcb @ hat(body_point) @ right_jacobian(x[ROT]))
        return H


class StateSelection(MeasurementModel):
    """Direct observation of selected packed-state components."""

    kind = "pose_direct"

    def __init__(self, indices, state_dim: int = STATE_DIM):
        self.indices = np.asarray(indices, dtype=int)
        self.state_dim = state_dim

    @property
    def dim(self) -> int:
        return self.indices.size

    def predict(self, x, u):
        return np.asarray(x, dtype=float)[self.indices]

    def state_jacobian(self, x, u):
        H = np.zeros((self.dim, self.state_dim))
        H[np.arange(self.dim), self.indices] = 1.0
        return H


class DerivativeSelection(StateSelection):
    """Observation of selected components of the interpolated xdot."""

    kind = "state_derivative"
    uses_derivative = True


@dataclass(frozen=True)
class MeasurementRecord:
    """One timestamped measurement with Gaussian noise covariance."""

    time: float
    z: np.ndarray
    covariance: np.ndarray
    model: MeasurementModel

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        R = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if z.shape != (self.model.dim,):
            raise ValueError(f"z has shape {z.shape}, model dimension is {self.model.dim}")
        if R.shape != (z.size, z.size):
            raise ValueError("covariance shape does not match z")
        if np.max(np.abs(R - R.T)) > 1e-12 * max(1.0, np.max(np.abs(R))):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "covariance", R)

    def noise_factor(self) -> np.ndarray:
        """Lower Cholesky factor of the covariance; fails on non-SPD R."""
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError as exc:
            raise ValueError("measurement covariance is not positive definite") from exc


def _whiten(L: np.ndarray, rows: np.ndarray) -> np.ndarray:
    return scipy.linalg.solve_triangular(L, rows, lower=True)


def _interp_weights(record: MeasurementRecord, X: StateTrajectory) -> np.ndarray:
    w = barycentric_weights(X.grid, record.time).weights
    if record.model.uses_derivative:
        return differentiation_matrix(X.grid).entries.T @ w
    return w


def residual(
    record: MeasurementRecord, X: StateTrajectory, U: ControlTrajectory
) -> np.ndarray:
    """Whitened residual L^-1 (z - h(x(t_i), u(t_i)))."""
    w = _interp_weights(record, X)
    x = X.values @ w
    u = U.values @ barycentric_weights(U.grid, record.time).weights
    r = record.z - record.model.predict(x, u)
    return _whiten(record.noise_factor(), r)


def residual_jacobian(
    record: MeasurementRecord, X: StateTrajectory, U: ControlTrajectory
) -> tuple[np.ndarray, np.ndarray]:
    """Whitened residual Jacobian rows over (vec(X), vec(U)).

    The raw rows are -(w^T kron H); vec stacks the node columns, so block j
    of the row is w_j * H.
    """
    w = _interp_weights(record, X)
    wu = barycentric_weights(U.grid, record.time).weights
    x = X.values @ w
    u = U.values @ wu
    Hx = record.model.state_jacobian(x, u)
    L = record.noise_factor()
    Jx = -_whiten(L, np.kron(w[None, :], Hx))
    Hu = record.model.control_jacobian(x, u)
    if Hu is None:
        Ju = np.zeros((record.model.dim, U.values.size))
    else:
        Ju = -_whiten(L, np.kron(wu[None, :], Hu))
    return Jx, Ju
