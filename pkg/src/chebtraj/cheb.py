"""Chebyshev-Gauss-Lobatto grids, barycentric interpolation and spectral differentiation.

A degree-N polynomial on an interval is represented by its values at the
N+1 CGL nodes.  This module provides the node grid on arbitrary time
intervals, the barycentric weight vector that evaluates the interpolant at
any query time as an inner product with the node values, the spectral
differentiation matrix in real time units, and the cosine transform between
node samples and series coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChebyshevGrid",
    "WeightVector",
    "DifferentiationMatrix",
    "SeriesCoefficients",
    "make_grid",
    "chebyshev_T",
    "barycentric_weights",
    "weight_matrix",
    "differentiation_matrix",
    "series_coefficients",
    "series_values",
]

# Queries closer to a node than this fraction of the interval snap to the
# exact-hit unit-weight case; the 1/(t - t_j) terms cancel catastrophically
# below it.
NODE_SNAP_REL = 1e-13


@dataclass(frozen=True)
class ChebyshevGrid:
    """N+1 CGL node times on [t0, tf], ordered from tf down to t0.

    ``nodes[j] = (tf+t0)/2 + (tf-t0)/2 * cos(j*pi/N)``, so ``nodes[0] == tf``
    and ``nodes[N] == t0`` exactly.  Callers must not assume ascending time.
    """

    degree: int
    t0: float
    tf: float
    nodes: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.degree + 1

    @property
    def span(self) -> float:
        return self.tf - self.t0

    def contains(self, t: float) -> bool:
        return self.t0 <= t <= self.tf


@dataclass(frozen=True)
class WeightVector:
    """Barycentric interpolation weights for one query time.

    Off a node the weights sum to 1; on a node they form the unit basis
    vector selecting that node's sample.
    """

    weights: np.ndarray
    query_time: float


@dataclass(frozen=True)
class DifferentiationMatrix:
    """Spectral differentiation matrix in 1/second units.

    Applied to node samples of a polynomial of degree <= N it returns node
    samples of the exact derivative (to roundoff).  Row sums are zero.
    """

    entries: np.ndarray
    grid: ChebyshevGrid


@dataclass(frozen=True)
class SeriesCoefficients:
    """Coefficients a_k of the truncated Chebyshev series, k = 0..N."""

    coeffs: np.ndarray


def make_grid(degree: int, t0: float, tf: float) -> ChebyshevGrid:
    """Build the CGL grid of the given degree on [t0, tf].

    Raises
    ------
    ValueError
        If degree < 1, the bounds are not finite, or tf <= t0.
    """
    if int(degree) != degree or degree < 1:
        raise ValueError(f"grid degree must be an integer >= 1, got {degree}")
    degree = int(degree)
    t0 = float(t0)
    tf = float(tf)
    if not (math.isfinite(t0) and math.isfinite(tf)):
        raise ValueError("grid bounds must be finite")
    if tf <= t0:
        raise ValueError(f"need tf > t0, got t0={t0}, tf={tf}")

    j = np.arange(degree + 1)
    nodes = 0.5 * (tf + t0) + 0.5 * (tf - t0) * np.cos(j * np.pi / degree)
    # The affine map can round the endpoints off by an ulp; pin them.
    nodes[0] = tf
    nodes[-1] = t0
    nodes.setflags(write=False)
    return ChebyshevGrid(degree=degree, t0=t0, tf=tf, nodes=nodes)


def chebyshev_T(k: int, tau: float) -> float:
    """Chebyshev polynomial T_k(tau) = cos(k*arccos(tau)) on [-1, 1]."""
    if int(k) != k or k < 0:
        raise ValueError(f"polynomial index must be an integer >= 0, got {k}")
    if abs(tau) > 1.0:
        raise ValueError(f"tau must lie in [-1, 1], got {tau}")
    return math.cos(k * math.acos(tau))


def _sign_pattern(num_nodes: int) -> np.ndarray:
    """Alternating-sign barycentric numerators with halved endpoints."""
    s = np.ones(num_nodes)
    s[1::2] = -1.0
    s[0] *= 0.5
    s[-1] *= 0.5
    return s


def barycentric_weights(grid: ChebyshevGrid, t: float) -> WeightVector:
    """Barycentric weight vector w(t) with X @ w(t) the interpolant at t.

    Exact (and near-exact) node hits return the unit basis vector.
    Extrapolation outside [t0, tf] is rejected: the barycentric formula is
    unstable there and nothing in the estimation pipeline needs it.
    """
    t = float(t)
    if not grid.contains(t):
        raise ValueError(
            f"query time {t} outside grid interval [{grid.t0}, {grid.tf}]"
        )
    diff = t - grid.nodes
    snap = np.abs(diff) < NODE_SNAP_REL * grid.span
    w = np.zeros(grid.num_nodes)
    if snap.any():
        w[int(np.argmax(snap))] = 1.0
        return WeightVector(weights=w, query_time=t)
    w = _sign_pattern(grid.num_nodes) / diff
    w /= w.sum()
    return WeightVector(weights=w, query_time=t)


def weight_matrix(grid: ChebyshevGrid, times: np.ndarray) -> np.ndarray:
    """Stack barycentric weight vectors for many query times.

    Returns a (N+1, len(times)) matrix W with column k = w(times[k]), so
    ``X @ W`` interpolates a whole value matrix at once.
    """
    times = np.asarray(times, dtype=float)
    W = np.empty((grid.num_nodes, times.size))
    for k, t in enumerate(times.ravel()):
        W[:, k] = barycentric_weights(grid, t).weights
    return W


def differentiation_matrix(grid: ChebyshevGrid) -> DifferentiationMatrix:
    """CGL spectral differentiation matrix scaled to the grid's interval.

    Entries are the canonical [-1, 1] matrix (Trefethen's cheb) times
    2/(tf-t0); diagonals use the negative-sum trick so every row sums to
    zero exactly.
    """
    n = grid.degree
    j = np.arange(n + 1)
    x = np.cos(j * np.pi / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (c[:, None] / c[None, :]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    D *= 2.0 / grid.span
    D.setflags(write=False)
    return DifferentiationMatrix(entries=D, grid=grid)


def _cosine_matrix(n: int) -> np.ndarray:
    """Synthesis matrix C with C[j, k] = T_k(tau_j) = cos(j*k*pi/N)."""
    j = np.arange(n + 1)
    return np.cos(np.outer(j, j) * (np.pi / n))


def series_coefficients(samples: np.ndarray) -> SeriesCoefficients:
    """Chebyshev series coefficients from CGL node samples.

    The coefficients a_k satisfy sum_k a_k T_k(tau_j) = samples[j]; they are
    computed with the explicit O(N^2) cosine transform (N stays small here,
    and coefficients are only used diagnostically).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("samples must be a non-empty 1-D sequence")
    n = samples.size - 1
    if n == 0:
        return SeriesCoefficients(coeffs=samples.copy())
    halved = samples.copy()
    halved[0] *= 0.5
    halved[-1] *= 0.5
    a = (2.0 / n) * (_cosine_matrix(n) @ halved)
    a[0] *= 0.5
    a[-1] *= 0.5
    return SeriesCoefficients(coeffs=a)


def series_values(coeffs: SeriesCoefficients) -> np.ndarray:
    """Node samples from series coefficients (inverse of series_coefficients)."""
    a = np.asarray(coeffs.coeffs, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("coefficients must be a non-empty 1-D sequence")
    if a.size == 1:
        return a.copy()
    return _cosine_matrix(a.size - 1) @ a
