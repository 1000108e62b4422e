"""Plant model, grids, signals, and time integration.

The plant is a controlled linear Volterra integrodifferential equation

    w'(t) = A w(t) + int_tau^t N(t-s) w(s) ds + B u(t)
            + int_0^tau N(t-s) xi_tail(s) ds,      w(tau) = xi_head,

driven from an initial node ``tau`` with a finite history (the *tail*)
on [0, tau].  Everything lives on a uniform grid; all integrals are
composite trapezoid sums on that grid, and time stepping is an
implicit-trapezoid update that keeps the new node inside the memory sum
with weight h/2 (a small d x d solve per step, second order in h).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigurationError

__all__ = [
    "TimeGrid",
    "SystemSpec",
    "InitialState",
    "ReferenceSignal",
    "ControlSignal",
    "StateTrajectory",
    "FundamentalMatrix",
    "exponential_kernel",
    "zero_kernel",
    "trapezoid_weights",
    "fundamental_matrix",
    "simulate",
    "voc_solution",
    "cost",
    "extend_state",
]


def trapezoid_weights(count: int, h: float) -> np.ndarray:
    """Composite-trapezoid weights for ``count`` uniformly spaced nodes.

    A single node (degenerate interval) gets weight zero.
    """
    if count < 1:
        raise ConfigurationError("weight count must be >= 1")
    if count == 1:
        return np.zeros(1)
    w = np.full(count, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i*h, i = 0..steps, with h = horizon/steps."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ConfigurationError("horizon must be strictly positive")
        if self.steps < 2:
            raise ConfigurationError("grid needs at least 2 steps")

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def weights(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Trapezoid weights on the sub-grid of nodes start..stop."""
        stop = self.steps if stop is None else stop
        if not 0 <= start <= stop <= self.steps:
            raise ConfigurationError("weight window out of range")
        return trapezoid_weights(stop - start + 1, self.h)


@dataclass(frozen=True)
class SystemSpec:
    """Plant matrices and the memory kernel sampled on a grid.

    Attributes
    ----------
    A : (d, d) drift matrix.
    B : (d, m) input matrix.
    C : (p, d) output matrix.
    N : (steps+1, d, d) kernel samples, ``N[i] = N(t_i)``.

    A and N(t) are not assumed to commute.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        N = np.asarray(self.N, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "N", N)
        d = A.shape[0]
        if A.shape != (d, d):
            raise ConfigurationError("A must be square")
        if B.ndim != 2 or B.shape[0] != d:
            raise ConfigurationError("B must be d x m")
        if C.ndim != 2 or C.shape[1] != d:
            raise ConfigurationError("C must be p x d")
        if N.ndim != 3 or N.shape[1:] != (d, d):
            raise ConfigurationError("N must be sampled as (nodes, d, d)")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def check_grid(self, grid: TimeGrid) -> None:
        if self.N.shape[0] != grid.steps + 1:
            raise ConfigurationError(
                f"kernel sampled on {self.N.shape[0]} nodes, grid has {grid.steps + 1}"
            )


def exponential_kernel(grid: TimeGrid, terms) -> np.ndarray:
    """Sample N(t) = sum_k G_k * exp(-lambda_k * t) on the grid.

    ``terms`` is an iterable of (G_k, lambda_k) with G_k a d x d array
    and lambda_k >= 0.
    """
    terms = [(np.asarray(G, dtype=float), float(lam)) for G, lam in terms]
    if not terms:
        raise ConfigurationError("exponential kernel needs at least one term")
    d = terms[0][0].shape[0]
    out = np.zeros((grid.steps + 1, d, d))
    for G, lam in terms:
        if G.shape != (d, d):
            raise ConfigurationError("kernel term matrices must share one shape")
        if lam < 0.0:
            raise ConfigurationError("kernel rates must be >= 0")
        out += np.exp(-lam * grid.nodes)[:, None, None] * G
    return out


def zero_kernel(grid: TimeGrid, d: int) -> np.ndarray:
    """Zero memory kernel (memoryless plant) sampled on the grid."""
    return np.zeros((grid.steps + 1, d, d))


@dataclass(frozen=True)
class InitialState:
    """State (head, tail) at grid node ``tau_index``.

    ``head`` is the value at t_tau; ``tail`` holds node values on
    t_0..t_tau.  The tail is an arbitrary grid function; it need not be a
    trajectory of the plant, and its own value at the junction node is
    kept separate from the head (no continuity is assumed).  When
    ``tau_index == 0`` the state is the head alone and the tail entry is
    ignored (its quadrature weight is zero).
    """

    tau_index: int
    head: np.ndarray
    tail: np.ndarray | None = None

    def __post_init__(self):
        head = np.asarray(self.head, dtype=float).reshape(-1)
        object.__setattr__(self, "head", head)
        if self.tau_index < 0:
            raise ConfigurationError("tau_index must be >= 0")
        if self.tail is None:
            tail = np.zeros((self.tau_index + 1, head.size))
        else:
            tail = np.asarray(self.tail, dtype=float)
        object.__setattr__(self, "tail", tail)
        if tail.shape != (self.tau_index + 1, head.size):
            raise ConfigurationError(
                f"tail must cover nodes 0..{self.tau_index} with d={head.size}"
            )

    @property
    def d(self) -> int:
        return self.head.size


@dataclass(frozen=True)
class ReferenceSignal:
    """Reference output samples y_i on every grid node 0..n."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ConfigurationError("reference values must be (nodes, p)")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ControlSignal:
    """Control samples u_i on grid nodes start_index..n."""

    start_index: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ConfigurationError("control values must be (nodes, m)")
        object.__setattr__(self, "values", v)

    @staticmethod
    def zero(grid: TimeGrid, m: int, start_index: int = 0) -> "ControlSignal":
        return ControlSignal(start_index, np.zeros((grid.steps + 1 - start_index, m)))


@dataclass(frozen=True)
class StateTrajectory:
    """Node values w_i on 0..n; nodes below start_index hold the tail."""

    start_index: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ConfigurationError("trajectory values must be (nodes, d)")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FundamentalMatrix:
    """Samples Z_i = Z(t_i) of the adjoint-kernel fundamental matrix."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ConfigurationError("Z must be sampled as (nodes, d, d)")
        object.__setattr__(self, "values", v)


# ---------------------------------------------------------------------------
# internals shared by the integrators
# ---------------------------------------------------------------------------


def _tail_forcing(sys: SystemSpec, xi: InitialState, grid: TimeGrid) -> np.ndarray:
    """f(t_i) = int_0^tau N(t_i - s) tail(s) ds for i = tau..n.

    Returns an array of shape (n - tau + 1, d); zero when tau_index == 0.
    The tail's own junction value enters at s = tau (weight h/2).
    """
    k, n, d = xi.tau_index, grid.steps, sys.d
    out = np.zeros((n - k + 1, d))
    if k == 0:
        return out
    wt = grid.weights(0, k)
    rows = np.arange(k, n + 1)[:, None] - np.arange(k + 1)[None, :]
    gathered = sys.N[rows]  # (n-k+1, k+1, d, d)
    return np.einsum("ijab,jb,j->ia", gathered, xi.tail, wt)


def _check_control(xi: InitialState, u: ControlSignal, grid: TimeGrid, m: int) -> None:
    k = xi.tau_index
    if u.start_index != k:
        raise ConfigurationError(
            f"control window starts at node {u.start_index}, state sits at node {k}"
        )
    if u.values.shape != (grid.steps + 1 - k, m):
        raise ConfigurationError("control values do not cover nodes tau..n")


def _step_matrix_lu(A: np.ndarray, N0: np.ndarray, h: float):
    """LU factors of I - h/2 A - h^2/4 N0, the implicit step matrix."""
    d = A.shape[0]
    return lu_factor(np.eye(d) - 0.5 * h * A - 0.25 * h * h * N0)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def fundamental_matrix(sys: SystemSpec, grid: TimeGrid) -> FundamentalMatrix:
    """Solve Z'(t) = A* Z(t) + int_0^t N*(t-s) Z(s) ds, Z(0) = I.

    Z is the adjoint-kernel fundamental matrix; the forward flow of the
    plant is its transpose, w(t) = Z*(t) w(0) for the free system.
    Second-order accurate in h.
    """
    sys.check_grid(grid)
    n, d, h = grid.steps, sys.d, grid.h
    At = sys.A.T
    Nt = np.transpose(sys.N, (0, 2, 1))
    Z = np.zeros((n + 1, d, d))
    Z[0] = np.eye(d)
    lu = _step_matrix_lu(At, Nt[0], h)
    f_prev = At.copy()  # A* Z_0 + empty memory sum
    for i in range(n):
        # memory sum at t_{i+1}, known part (nodes 0..i of the trapezoid)
        w = trapezoid_weights(i + 2, h)[: i + 1]
        mem = np.einsum("jab,jbc,j->ac", Nt[i + 1 : 0 : -1], Z[: i + 1], w)
        rhs = Z[i] + 0.5 * h * (f_prev + mem)
        Z[i + 1] = lu_solve(lu, rhs)
        f_prev = At @ Z[i + 1] + mem + 0.5 * h * (Nt[0] @ Z[i + 1])
    return FundamentalMatrix(Z)


def simulate(
    sys: SystemSpec, grid: TimeGrid, xi: InitialState, u: ControlSignal
) -> StateTrajectory:
    """Time-step the plant from node tau with control u.

    The returned trajectory is extended to [0, tau) by the tail of the
    initial state; its value at the junction node is the head.
    """
    sys.check_grid(grid)
    _check_control(xi, u, grid, sys.m)
    k, n, d, h = xi.tau_index, grid.steps, sys.d, grid.h
    if xi.d != d:
        raise ConfigurationError("state dimension does not match the plant")
    w = np.zeros((n + 1, d))
    w[:k] = xi.tail[:k]
    w[k] = xi.head
    f = _tail_forcing(sys, xi, grid)
    Bu = u.values @ sys.B.T
    lu = _step_matrix_lu(sys.A, sys.N[0], h)
    f_prev = sys.A @ w[k] + f[0] + Bu[0]  # memory over [tau, tau] is empty
    for i in range(k, n):
        wts = trapezoid_weights(i + 2 - k, h)[: i + 1 - k]
        mem = np.einsum("jab,jb,j->a", sys.N[i + 1 - k : 0 : -1], w[k : i + 1], wts)
        rhs = w[i] + 0.5 * h * (f_prev + mem + f[i + 1 - k] + Bu[i + 1 - k])
        w[i + 1] = lu_solve(lu, rhs)
        f_prev = (
            sys.A @ w[i + 1]
            + mem
            + 0.5 * h * (sys.N[0] @ w[i + 1])
            + f[i + 1 - k]
            + Bu[i + 1 - k]
        )
    return StateTrajectory(k, w)


def voc_solution(
    sys: SystemSpec,
    grid: TimeGrid,
    Z: FundamentalMatrix,
    xi: InitialState,
    u: ControlSignal,
) -> StateTrajectory:
    """Variation-of-constants evaluation of the trajectory.

    w(t) = Z*(t-tau) head + int_tau^t Z*(t-r) [f(r) + B u(r)] dr with f
    the tail forcing; agrees with :func:`simulate` to O(h^2).
    """
    sys.check_grid(grid)
    _check_control(xi, u, grid, sys.m)
    k, n, d, h = xi.tau_index, grid.steps, sys.d, grid.h
    Zv = Z.values
    if Zv.shape != (n + 1, d, d):
        raise ConfigurationError("fundamental matrix not sampled on this grid")
    w = np.zeros((n + 1, d))
    w[:k] = xi.tail[:k]
    w[k] = xi.head
    g = _tail_forcing(sys, xi, grid) + u.values @ sys.B.T
    for i in range(k + 1, n + 1):
        wts = trapezoid_weights(i - k + 1, h)
        w[i] = Zv[i - k].T @ xi.head + np.einsum(
            "qba,qb,q->a", Zv[i - k :: -1][: i - k + 1], g[: i - k + 1], wts
        )
    return StateTrajectory(k, w)


def cost(
    sys: SystemSpec,
    grid: TimeGrid,
    w: StateTrajectory,
    u: ControlSignal,
    y: ReferenceSignal,
    start_index: int | None = None,
) -> float:
    """Trapezoid value of int_tau^T ||C w - y||^2 + ||u||^2 dt."""
    k = u.start_index if start_index is None else start_index
    if k != u.start_index:
        raise ConfigurationError("start index disagrees with the control window")
    wts = grid.weights(k)
    res = w.values[k:] @ sys.C.T - y.values[k:]
    return float(wts @ ((res * res).sum(axis=1) + (u.values * u.values).sum(axis=1)))


def extend_state(w: StateTrajectory, r: int) -> InitialState:
    """Finite-memory state (w_r, w restricted to 0..r) at node r."""
    n = w.values.shape[0] - 1
    if not w.start_index <= r <= n:
        raise ConfigurationError(f"node {r} outside the trajectory window")
    return InitialState(r, w.values[r].copy(), w.values[: r + 1].copy())
