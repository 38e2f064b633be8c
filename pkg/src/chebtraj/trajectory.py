"""Pseudo-spectral trajectories: value matrices at CGL nodes.

A continuous vector function on [t0, tf] is stored as the matrix of its
values at the grid nodes, one column per node.  Interpolation at time t is
``values @ w(t)``; derivative interpolation differentiates each row through
the spectral matrix first, ``(values @ D.T) @ w(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .cheb import ChebyshevGrid, barycentric_weights, differentiation_matrix, weight_matrix

__all__ = ["StateTrajectory", "ControlTrajectory", "sample_function"]


def _check_values(grid: ChebyshevGrid, values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float, copy=True)
    if values.ndim == 1:
        values = values[None, :]
    if values.ndim != 2:
        raise ValueError("trajectory values must be a 2-D matrix")
    if values.shape[1] != grid.num_nodes:
        raise ValueError(
            f"value matrix has {values.shape[1]} columns, grid has "
            f"{grid.num_nodes} nodes"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("trajectory values must be finite")
    return values


@dataclass(frozen=True, eq=False)
class _NodeValueTrajectory:
    grid: ChebyshevGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values))
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @cached_property
    def _derivative_values(self) -> np.ndarray:
        D = differentiation_matrix(self.grid).entries
        return self.values @ D.T

    def eval(self, t: float) -> np.ndarray:
        """Interpolated value at time t; exactly column j at node j."""
        return self.values @ barycentric_weights(self.grid, t).weights

    def eval_derivative(self, t: float) -> np.ndarray:
        """Interpolated time derivative at t, in value units per second."""
        return self._derivative_values @ barycentric_weights(self.grid, t).weights

    def eval_many(self, times: np.ndarray) -> np.ndarray:
        """Values at many times, one column per query time."""
        return self.values @ weight_matrix(self.grid, times)

    def eval_derivative_many(self, times: np.ndarray) -> np.ndarray:
        return self._derivative_values @ weight_matrix(self.grid, times)


class StateTrajectory(_NodeValueTrajectory):
    """n x (N+1) state value matrix X on a CGL grid."""

    @property
    def state_dim(self) -> int:
        return self.dim


class ControlTrajectory(_NodeValueTrajectory):
    """p x (N+1) control value matrix U on a CGL grid."""

    @property
    def control_dim(self) -> int:
        return self.dim


def eval_state(traj: StateTrajectory, t: float) -> np.ndarray:
    return traj.eval(t)


def eval_state_derivative(traj: StateTrajectory, t: float) -> np.ndarray:
    return traj.eval_derivative(t)


def eval_control(traj: ControlTrajectory, t: float) -> np.ndarray:
    return traj.eval(t)


def sample_function(grid: ChebyshevGrid, fn: Callable[[float], np.ndarray]) -> np.ndarray:
    """Value matrix with column j = fn(nodes[j])."""
    cols = [np.atleast_1d(np.asarray(fn(t), dtype=float)) for t in grid.nodes]
    return np.column_stack(cols)
