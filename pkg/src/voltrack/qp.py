"""Independent ground truth: direct transcription to a least-squares problem.

The discrete tracking cost is a quadratic in the stacked control nodes,

    J(u) = sum_i w_i ( ||(G u + g)_i - y_i||^2 + ||u_i||^2 ),

with G assembled column by column from unit-impulse runs of the plant
integrator and g the zero-control response.  The minimizer solves the
SPD normal equations; the trapezoid weights w match the cost used
everywhere else, so the oracle's optimality is exact on the shared grid,
not merely asymptotic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigurationError, SingularSystemError
from .model import (
    ControlSignal,
    InitialState,
    ReferenceSignal,
    SystemSpec,
    TimeGrid,
    simulate,
)

__all__ = [
    "DiscreteAffineMap",
    "build_affine_map",
    "solve_qp",
    "qp_cost",
    "qp_gradient",
    "gradient_check",
]


@dataclass(frozen=True)
class DiscreteAffineMap:
    """Stacked control-to-output map of the discretized plant.

    ``G @ u_stacked + g`` equals the stacked output C w of the
    integrator driven by u from the frozen initial state; ``weights``
    are the trapezoid weights of the cost window.
    """

    start_index: int
    p: int
    m: int
    G: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def build_affine_map(
    sys: SystemSpec, grid: TimeGrid, xi: InitialState
) -> DiscreteAffineMap:
    """Assemble (G, g) by unit node impulses and the zero-control run."""
    k = xi.tau_index
    nk = grid.steps + 1 - k
    m, p = sys.m, sys.p
    g_traj = simulate(sys, grid, xi, ControlSignal.zero(grid, m, k))
    g_vec = (g_traj.values[k:] @ sys.C.T).reshape(-1)
    zero_state = InitialState(k, np.zeros(sys.d))
    G = np.zeros((nk * p, nk * m))
    uvals = np.zeros((nk, m))
    for q in range(nk):
        for a in range(m):
            uvals[q, a] = 1.0
            col = simulate(sys, grid, zero_state, ControlSignal(k, uvals))
            G[:, q * m + a] = (col.values[k:] @ sys.C.T).reshape(-1)
            uvals[q, a] = 0.0
    return DiscreteAffineMap(k, p, m, G, g_vec, grid.weights(k))


def _weight_vectors(dmap: DiscreteAffineMap) -> tuple[np.ndarray, np.ndarray]:
    wp = np.repeat(dmap.weights, dmap.p)
    wm = np.repeat(dmap.weights, dmap.m)
    return wp, wm


def qp_cost(dmap: DiscreteAffineMap, y: ReferenceSignal, u: ControlSignal) -> float:
    """Weighted discrete cost of a stacked control."""
    wp, wm = _weight_vectors(dmap)
    uv = u.values.reshape(-1)
    r = dmap.G @ uv + dmap.g - y.values[dmap.start_index :].reshape(-1)
    return float(wp @ (r * r) + wm @ (uv * uv))


def qp_gradient(
    dmap: DiscreteAffineMap, y: ReferenceSignal, u: ControlSignal
) -> np.ndarray:
    """Analytic gradient of :func:`qp_cost` with respect to the stacked u."""
    wp, wm = _weight_vectors(dmap)
    uv = u.values.reshape(-1)
    r = dmap.G @ uv + dmap.g - y.values[dmap.start_index :].reshape(-1)
    return 2.0 * (dmap.G.T @ (wp * r) + wm * uv)


def solve_qp(dmap: DiscreteAffineMap, y: ReferenceSignal) -> ControlSignal:
    """Minimize the discrete cost via the SPD normal equations."""
    wp, wm = _weight_vectors(dmap)
    H = dmap.G.T @ (wp[:, None] * dmap.G)
    H[np.diag_indices_from(H)] += wm
    rhs = -dmap.G.T @ (wp * (dmap.g - y.values[dmap.start_index :].reshape(-1)))
    try:
        sol = cho_solve(cho_factor(H), rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
        raise SingularSystemError(f"normal equations not SPD: {exc}") from exc
    return ControlSignal(dmap.start_index, sol.reshape(-1, dmap.m))


def gradient_check(
    dmap: DiscreteAffineMap, y: ReferenceSignal, u: ControlSignal, eps: float
) -> float:
    """Max gap between central differences of the cost and the gradient."""
    if eps <= 0.0:
        raise ConfigurationError("eps must be positive")
    grad = qp_gradient(dmap, y, u)
    worst = 0.0
    base = u.values.copy()
    for idx in range(base.size):
        q, a = divmod(idx, dmap.m)
        for sign in (1.0, -1.0):
            base[q, a] += sign * eps
            val = qp_cost(dmap, y, ControlSignal(dmap.start_index, base))
            base[q, a] -= sign * eps
            if sign > 0:
                plus = val
            else:
                minus = val
        fd = (plus - minus) / (2.0 * eps)
        worst = max(worst, abs(fd - grad[idx]))
    return worst
