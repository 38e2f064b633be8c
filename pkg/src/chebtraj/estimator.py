"""Joint state/control trajectory estimation by damped Gauss-Newton.

The unknowns are the node-value matrices X (n x (N+1)) and U (p x (N+1)),
optimized as the stacked vector [vec(X); vec(U)] with vec stacking columns.
The total cost is the sum of whitened measurement residuals, collocation
defect residuals at every grid node, and optional Gaussian column priors.
Defects soften the dynamics constraint: at node j the interpolated
derivative (X D^T) e_j must match f(X e_j, U e_j, t_j), weighted by the
inverse factor of the defect covariance Q.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cheb import ChebyshevGrid, barycentric_weights, differentiation_matrix
from .measurements import MeasurementRecord
from .trajectory import ControlTrajectory, StateTrajectory

__all__ = [
    "SolverSettings",
    "ColumnPrior",
    "PoseObservation",
    "EstimationProblem",
    "EstimateReport",
    "defect_residual",
    "defect_jacobian",
    "assemble_system",
    "initialize",
    "solve",
]

MAX_DAMPING = 1e12


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 100
    initial_damping: float = 1e-4
    damping_factor: float = 10.0
    cost_tolerance: float = 1e-9  # relative drop in total cost
    step_tolerance: float = 1e-10  # absolute norm of the update vector

    def __post_init__(self):
        if (
            self.max_iterations <= 0
            or self.initial_damping <= 0
            or self.cost_tolerance <= 0
            or self.step_tolerance <= 0
        ):
            raise ValueError("solver settings must be positive")
        if self.damping_factor <= 1.0:
            raise ValueError("damping factor must exceed 1")


@dataclass(frozen=True)
class ColumnPrior:
    """Gaussian prior on a state or control column; node None means every node."""

    target: str  # "state" | "control"
    mean: np.ndarray
    sigma: float
    node: int | None = None

    def __post_init__(self):
        if self.target not in ("state", "control"):
            raise ValueError("prior target must be 'state' or 'control'")
        if self.sigma <= 0:
            raise ValueError("prior sigma must be positive")
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))


@dataclass(frozen=True)
class PoseObservation:
    """Noisy pose (position + rotation vector) used only for initialization."""

    time: float
    position: np.ndarray
    rotation: np.ndarray


@dataclass
class EstimationProblem:
    grid: ChebyshevGrid
    dynamics: object
    defect_covariance: np.ndarray
    measurements: list[MeasurementRecord]
    priors: list[ColumnPrior] = field(default_factory=list)
    solver: SolverSettings = field(default_factory=SolverSettings)
    nominal_control: np.ndarray | None = None

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.defect_covariance, dtype=float))
        n = self.dynamics.state_dim
        if Q.shape != (n, n):
            raise ValueError(f"defect covariance must be {n}x{n}")
        if np.max(np.abs(Q - Q.T)) > 1e-12 * max(1.0, float(np.max(np.abs(Q)))):
            raise ValueError("defect covariance must be symmetric")
        try:
            np.linalg.cholesky(Q)
        except np.linalg.LinAlgError as exc:
            raise ValueError("defect covariance must be positive definite") from exc
        self.defect_covariance = Q
        for rec in self.measurements:
            if not self.grid.contains(rec.time):
                raise ValueError(
                    f"measurement at t={rec.time} outside grid interval"
                )


@dataclass
class EstimateReport:
    X_hat: StateTrajectory
    U_hat: ControlTrajectory
    cost_history: list[float]
    e_measurement: float
    e_defect: float
    e_prior: float
    converged: bool
    iterations: int
    wall_time_s: float
    message: str

    @property
    def final_cost(self) -> float:
        return self.cost_history[-1]

    def summary_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "cost_history": [float(c) for c in self.cost_history],
            "final_cost": float(self.final_cost),
            "measurement_cost": float(self.e_measurement),
            "defect_cost": float(self.e_defect),
            "prior_cost": float(self.e_prior),
            "message": self.message,
            "wall_time_s": float(self.wall_time_s),
        }


def _chol_lower(Q: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(np.atleast_2d(np.asarray(Q, dtype=float)))
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance must be positive definite") from exc


def defect_residual(
    X: StateTrajectory, U: ControlTrajectory, j: int, dynamics, Q: np.ndarray
) -> np.ndarray:
    """Whitened collocation defect at node j: L_Q^-1 ((X D^T) e_j - f_j)."""
    if not 0 <= j <= X.grid.degree:
        raise IndexError(f"node index {j} outside 0..{X.grid.degree}")
    t_j = X.grid.nodes[j]
    raw = X._derivative_values[:, j] - dynamics.f(X.values[:, j], U.values[:, j], t_j)
    return scipy.linalg.solve_triangular(_chol_lower(Q), raw, lower=True)


def defect_jacobian(
    X: StateTrajectory, U: ControlTrajectory, j: int, dynamics, Q: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Whitened defect Jacobian rows at node j over (vec(X), vec(U)).

    The derivative term contributes kron(D[j, :], I_n), coupling every node
    of each state row; the dynamics term -F_j, -G_j lands only in the
    node-j column blocks because w(t_j) is a unit vector.
    """
    if not 0 <= j <= X.grid.degree:
        raise IndexError(f"node index {j} outside 0..{X.grid.degree}")
    n = X.state_dim
    p = U.control_dim
    num_nodes = X.grid.num_nodes
    D = differentiation_matrix(X.grid).entries
    F, G = dynamics.jacobians(X.values[:, j], U.values[:, j], X.grid.nodes[j])
    Jx = np.kron(D[j, :][None, :], np.eye(n))
    Jx[:, j * n : (j + 1) * n] -= F
    Ju = np.zeros((n, p * num_nodes))
    Ju[:, j * p : (j + 1) * p] = -G
    L = _chol_lower(Q)
    return (
        scipy.linalg.solve_triangular(L, Jx, lower=True),
        scipy.linalg.solve_triangular(L, Ju, lower=True),
    )


class _Workspace:
    """Precomputed constants for repeated residual/Jacobian evaluation."""

    def __init__(self, problem: EstimationProblem):
        grid = problem.grid
        self.grid = grid
        self.n = problem.dynamics.state_dim
        self.p = problem.dynamics.control_dim
        self.num_nodes = grid.num_nodes
        self.nX = self.n * self.num_nodes
        self.nU = self.p * self.num_nodes
        self.dim = self.nX + self.nU
        self.D = differentiation_matrix(grid).entries
        self.kron_D_In = np.kron(self.D, np.eye(self.n))
        LQ = _chol_lower(problem.defect_covariance)
        self.LQ_inv = scipy.linalg.solve_triangular(LQ, np.eye(self.n), lower=True)
        self.dynamics = problem.dynamics

        # Per-record constants: interpolation weights and whitening factors.
        self.records = []
        for rec in problem.measurements:
            w = barycentric_weights(grid, rec.time).weights
            wx = self.D.T @ w if rec.model.uses_derivative else w
            Linv = scipy.linalg.solve_triangular(
                rec.noise_factor(), np.eye(rec.model.dim), lower=True
            )
            self.records.append((rec, wx, w, Linv))
        self.meas_rows = sum(rec.model.dim for rec in problem.measurements)

        # Priors expand to per-node entries on the stacked vector.
        self.prior_entries = []
        for prior in problem.priors:
            dim = self.n if prior.target == "state" else self.p
            if prior.mean.shape != (dim,):
                raise ValueError("prior mean dimension mismatch")
            nodes = range(self.num_nodes) if prior.node is None else [prior.node]
            for j in nodes:
                offset = (j * self.n) if prior.target == "state" else (self.nX + j * self.p)
                self.prior_entries.append((offset, dim, prior.mean, prior.sigma))
        self.prior_rows = sum(dim for _, dim, _, _ in self.prior_entries)
        self.total_rows = self.meas_rows + self.num_nodes * self.n + self.prior_rows

    def split(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = s[: self.nX].reshape(self.n, self.num_nodes, order="F")
        U = s[self.nX :].reshape(self.p, self.num_nodes, order="F")
        return X, U

    def join(self, Xv: np.ndarray, Uv: np.ndarray) -> np.ndarray:
        return np.concatenate([Xv.ravel(order="F"), Uv.ravel(order="F")])

    def residuals(self, s: np.ndarray) -> np.ndarray:
        Xv, Uv = self.split(s)
        r = np.empty(self.total_rows)
        row = 0
        for rec, wx, wu, Linv in self.records:
            x = Xv @ wx
            u = Uv @ wu
            k = rec.model.dim
            r[row : row + k] = Linv @ (rec.z - rec.model.predict(x, u))
            row += k
        Xdot = Xv @ self.D.T
        for j in range(self.num_nodes):
            f_j = self.dynamics.f(Xv[:, j], Uv[:, j], self.grid.nodes[j])
            r[row : row + self.n] = self.LQ_inv @ (Xdot[:, j] - f_j)
            row += self.n
        for offset, dim, mean, sigma in self.prior_entries:
            r[row : row + dim] = (s[offset : offset + dim] - mean) / sigma
            row += dim
        return r

    def jacobian(self, s: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        Xv, Uv = self.split(s)
        J = out if out is not None else np.zeros((self.total_rows, self.dim))
        J[:] = 0.0
        row = 0
        for rec, wx, wu, Linv in self.records:
            x = Xv @ wx
            u = Uv @ wu
            k = rec.model.dim
            Hx = rec.model.state_jacobian(x, u)
            J[row : row + k, : self.nX] = -np.kron(wx[None, :], Linv @ Hx)
            Hu = rec.model.control_jacobian(x, u)
            if Hu is not None:
                J[row : row + k, self.nX :] = -np.kron(wu[None, :], Linv @ Hu)
            row += k
        for j in range(self.num_nodes):
            F, G = self.dynamics.jacobians(Xv[:, j], Uv[:, j], self.grid.nodes[j])
            block = self.kron_D_In[j * self.n : (j + 1) * self.n, :].copy()
            block[:, j * self.n : (j + 1) * self.n] -= F
            J[row : row + self.n, : self.nX] = self.LQ_inv @ block
            J[row : row + self.n, self.nX + j * self.p : self.nX + (j + 1) * self.p] = (
                -self.LQ_inv @ G
            )
            row += self.n
        for offset, dim, _, sigma in self.prior_entries:
            J[row : row + dim, offset : offset + dim] = np.eye(dim) / sigma
            row += dim
        return J

    def cost_parts(self, s: np.ndarray) -> tuple[float, float, float]:
        r = self.residuals(s)
        m = self.meas_rows
        d = self.num_nodes * self.n
        return (
            float(r[:m] @ r[:m]),
            float(r[m : m + d] @ r[m : m + d]),
            float(r[m + d :] @ r[m + d :]),
        )


def assemble_system(
    problem: EstimationProblem, X: StateTrajectory, U: ControlTrajectory
) -> tuple[np.ndarray, np.ndarray]:
    """Full stacked residual vector and Jacobian over [vec(X); vec(U)]."""
    ws = _Workspace(problem)
    s = ws.join(X.values, U.values)
    return ws.residuals(s), ws.jacobian(s)


def initialize(
    problem: EstimationProblem,
    pose_observations: list[PoseObservation],
    nominal_control: np.ndarray | None = None,
) -> tuple[StateTrajectory, ControlTrajectory]:
    """Initial (X0, U0) from sparse pose observations.

    Position and rotation rows are the piecewise-linear interpolant of the
    observations sampled at the nodes; velocity and angular-rate rows apply
    the differentiation matrix to those rows; controls start at the nominal
    vector (hover speeds for the quadrotor).
    """
    n = problem.dynamics.state_dim
    if n != 12:
        raise ValueError("pose initialization assumes the 12-state layout")
    if len(pose_observations) < 2:
        raise ValueError("need at least 2 pose observations to initialize")
    obs = sorted(pose_observations, key=lambda o: o.time)
    times = np.array([o.time for o in obs])
    grid = problem.grid
    slack = 0.1 * grid.span
    if times[0] > grid.t0 + slack or times[-1] < grid.tf - slack:
        raise ValueError("pose observations do not span the grid interval")

    pose = np.vstack(
        [
            np.column_stack([o.position for o in obs]),
            np.column_stack([o.rotation for o in obs]),
        ]
    )
    X0 = np.zeros((n, grid.num_nodes))
    for r in range(6):
        X0[r, :] = np.interp(grid.nodes, times, pose[r, :])
    D = differentiation_matrix(grid).entries
    X0[6:12, :] = X0[0:6, :] @ D.T

    if nominal_control is None:
        nominal_control = problem.nominal_control
    p = problem.dynamics.control_dim
    u0 = np.zeros(p) if nominal_control is None else np.asarray(nominal_control, dtype=float)
    U0 = np.tile(u0[:, None], (1, grid.num_nodes))
    return StateTrajectory(grid, X0), ControlTrajectory(grid, U0)


def solve(
    problem: EstimationProblem, X0: StateTrajectory, U0: ControlTrajectory
) -> EstimateReport:
    """Levenberg-Marquardt over [vec(X); vec(U)].

    Normal equations use Marquardt scaling (damping proportional to the
    diagonal of J^T J) and a dense Cholesky solve.  Steps are accepted only
    when the total cost decreases, so the accepted-cost sequence is
    non-increasing; trial steps that leave the dynamics chart are rejected
    like any other failed step.
    """
    t_start = _time.perf_counter()
    ws = _Workspace(problem)
    settings = problem.solver
    s = ws.join(X0.values, U0.values)

    r = ws.residuals(s)  # initial point must be feasible; errors propagate
    cost = float(r @ r)
    if not np.isfinite(cost):
        raise ValueError("initialization yields non-finite cost")

    J = np.zeros((ws.total_rows, ws.dim))
    lam = settings.initial_damping
    history = [cost]
    converged = False
    message = "max iterations reached"
    iterations = 0

    for iterations in range(1, settings.max_iterations + 1):
        ws.jacobian(s, out=J)
        A = J.T @ J
        g = J.T @ r
        diag = np.maximum(np.diag(A), 1e-12)

        step_accepted = False
        while lam <= MAX_DAMPING:
            H = A + lam * np.diag(diag)
            try:
                cho = scipy.linalg.cho_factor(H, lower=True)
                delta = scipy.linalg.cho_solve(cho, -g)
            except scipy.linalg.LinAlgError:
                lam *= settings.damping_factor
                continue
            s_trial = s + delta
            try:
                r_trial = ws.residuals(s_trial)
                cost_trial = float(r_trial @ r_trial)
            except ValueError:
                cost_trial = np.inf
            if np.isfinite(cost_trial) and cost_trial < cost:
                step_accepted = True
                break
            lam *= settings.damping_factor

        if not step_accepted:
            message = "damping exhausted without cost decrease"
            converged = cost <= history[0]  # stalled at (or below) start
            converged = False
            break

        drop = cost - cost_trial
        s, r, cost = s_trial, r_trial, cost_trial
        history.append(cost)
        lam = max(lam / settings.damping_factor, 1e-15)

        if drop <= settings.cost_tolerance * max(cost, 1.0):
            converged = True
            message = "cost decrease below tolerance"
            break
        if float(np.linalg.norm(delta)) <= settings.step_tolerance:
            converged = True
            message = "step size below tolerance"
            break

    Xv, Uv = ws.split(s)
    e1, e2, ep = ws.cost_parts(s)
    return EstimateReport(
        X_hat=StateTrajectory(problem.grid, Xv),
        U_hat=ControlTrajectory(problem.grid, Uv),
        cost_history=history,
        e_measurement=e1,
        e_defect=e2,
        e_prior=ep,
        converged=converged,
        iterations=iterations,
        wall_time_s=_time.perf_counter() - t_start,
        message=message,
    )
