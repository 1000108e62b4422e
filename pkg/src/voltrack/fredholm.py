"""Costate synthesis via a Fredholm integral equation of the second kind.

The optimal control is u(t) = -B* p(t) where the costate p solves

    p(t) + int_tau^T Ktilde(t,r) B B* p(r) dr = Y(t),

with the tracking kernel Ktilde(t,r) = int_{max(t,r)}^T Z(s-t) C*C Z*(s-r) ds
and a forcing Y built from the free response and the reference signal.
The equation is discretized by the Nystrom method with trapezoid weights;
the resolvent kernel R re-expresses the solution as p = Y - R Y and feeds
the synthesis kernels Q0/Q1/Q2 (costate) and H0/H1/H2 (trajectory).

Discrete conventions
--------------------
All quadratures share the grid's trapezoid weights, so the Q/H route
reproduces the Nystrom costate to round-off.  The y-kernels Q2 and H2 are
stored in quadrature-absorbed form (node weights folded in): the jump of
1(s-t) Z(s-t) at s = t is handled by splitting the trapezoid at the node,
where the left limit is zero, so the sample at the jump node carries
weight h/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigurationError, SingularSystemError
from .model import (
    ControlSignal,
    FundamentalMatrix,
    InitialState,
    ReferenceSignal,
    StateTrajectory,
    SystemSpec,
    TimeGrid,
    trapezoid_weights,
    voc_solution,
)

__all__ = [
    "TrackingKernel",
    "Forcing",
    "CostateTrajectory",
    "ResolventKernel",
    "SynthesisKernels",
    "build_kernel",
    "build_forcing",
    "solve_fredholm",
    "resolvent",
    "optimal_control_fredholm",
    "synthesis_kernels",
    "apply_synthesis",
    "costate_residual",
]


@dataclass(frozen=True)
class TrackingKernel:
    """Ktilde samples on the node pairs of [tau, T]^2.

    ``ktilde[i, j]`` is the d x d value at (t_{k+i}, t_{k+j}); the rows
    and columns at T vanish and ktilde(t, r) = ktilde(r, t)^T.
    """

    start_index: int
    ktilde: np.ndarray = field(repr=False)
    input_matrix: np.ndarray = field(repr=False)

    @property
    def kb(self) -> np.ndarray:
        """K = Ktilde B, shape (nk, nk, d, m)."""
        return np.einsum("ijab,bc->ijac", self.ktilde, self.input_matrix)

    def restrict(self, start_index: int) -> "TrackingKernel":
        """The same kernel on the smaller window [t_start, T].

        Ktilde does not depend on tau, so restriction is a plain slice.
        """
        off = start_index - self.start_index
        if off < 0 or off >= self.ktilde.shape[0]:
            raise ConfigurationError("restriction window outside the kernel grid")
        return TrackingKernel(start_index, self.ktilde[off:, off:], self.input_matrix)


@dataclass(frozen=True)
class Forcing:
    """Fredholm right-hand side Y and the free-response samples Y0."""

    start_index: int
    values: np.ndarray = field(repr=False)
    free_response: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CostateTrajectory:
    """Costate samples p_i on nodes tau..T; p(T) = 0."""

    start_index: int
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ResolventKernel:
    """Resolvent samples R(t_i, r_j; tau) on [tau, T]^2 node pairs."""

    start_index: int
    values: np.ndarray = field(repr=False)

    @property
    def max_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(
            np.linalg.norm(self.values, axis=(2, 3), ord=2).max()
        )


@dataclass(frozen=True)
class SynthesisKernels:
    """Discrete Q/H synthesis maps for a fixed starting node.

    q0, q1, h0, h1 hold plain node samples (applied with trapezoid
    weights); q2 and h2 are stored weighted, i.e. with the s-quadrature
    over [tau, T] (including the diagonal-jump split) already folded in.
    """

    start_index: int
    h: float
    input_matrix: np.ndarray = field(repr=False)
    q0: np.ndarray = field(repr=False)
    q1: np.ndarray = field(repr=False)
    q2: np.ndarray = field(repr=False)
    h0: np.ndarray = field(repr=False)
    h1: np.ndarray = field(repr=False)
    h2: np.ndarray = field(repr=False)


def build_kernel(
    sys: SystemSpec, Z: FundamentalMatrix, grid: TimeGrid, start_index: int = 0
) -> TrackingKernel:
    """Assemble Ktilde(t,r) = int_{max(t,r)}^T Z(s-t) C*C Z*(s-r) ds.

    Trapezoid quadrature on the grid; assembled one lag diagonal at a
    time so the whole table costs O(n^2) matrix products.
    """
    sys.check_grid(grid)
    n, d, h = grid.steps, sys.d, grid.h
    k = start_index
    if not 0 <= k <= n:
        raise ConfigurationError("start index outside the grid")
    nk = n - k + 1
    Zv = Z.values
    CC = sys.C.T @ sys.C
    ZCC = Zv @ CC  # Z(u) C*C, batched over u
    ktilde = np.zeros((nk, nk, d, d))
    for lag in range(nk):
        m = nk - lag  # pairs (i, j) with i - j = lag, i = k+lag .. n
        G = np.matmul(ZCC[:m], np.transpose(Zv[lag : lag + m], (0, 2, 1)))
        cum = np.cumsum(G, axis=0)
        # row i has n-i = (m-1) - t quadrature panels, t the along-diagonal index
        arr = h * cum - 0.5 * h * G - 0.5 * h * G[0]
        block = arr[::-1]
        rows = lag + np.arange(m)
        ktilde[rows, np.arange(m)] = block
        if lag > 0:
            ktilde[np.arange(m), rows] = np.transpose(block, (0, 2, 1))
    ktilde[-1, :] = 0.0  # empty integration range at t = T and r = T
    ktilde[:, -1] = 0.0
    return TrackingKernel(k, ktilde, sys.B.copy())


def build_forcing(
    sys: SystemSpec,
    Z: FundamentalMatrix,
    grid: TimeGrid,
    xi: InitialState,
    y: ReferenceSignal,
) -> Forcing:
    """Forcing Y(t) = int_t^T Z(s-t) C* [C Y0(s) - y(s)] ds.

    Y0 is the free response of the plant from the initial state (head
    propagated by Z* plus the tail-driven convolution term).
    """
    k, n, h = xi.tau_index, grid.steps, grid.h
    zero_u = ControlSignal.zero(grid, sys.m, k)
    y0 = voc_solution(sys, grid, Z, xi, zero_u).values[k:]
    v = (y0 @ sys.C.T - y.values[k:]) @ sys.C  # C*(C Y0 - y), row-vector form
    nk = n - k + 1
    Zv = Z.values
    out = np.zeros((nk, sys.d))
    for il in range(nk - 1):
        wts = trapezoid_weights(nk - il, h)
        out[il] = np.einsum("qab,qb,q->a", Zv[: nk - il], v[il:], wts)
    return Forcing(k, out, y0)


def _nystrom_matrix(kernel: TrackingKernel, grid: TimeGrid) -> tuple:
    """Dense blocks of the discrete operator: (I + Ktilde BB* W, Ktilde BB*)."""
    k = kernel.start_index
    nk = grid.steps - k + 1
    d = kernel.ktilde.shape[2]
    if kernel.ktilde.shape[0] != nk:
        raise ConfigurationError("kernel not sampled on this grid window")
    bbt = kernel.input_matrix @ kernel.input_matrix.T
    kb = np.einsum("ijab,bc->ijac", kernel.ktilde, bbt)
    w = grid.weights(k)
    big = (kb * w[None, :, None, None]).transpose(0, 2, 1, 3).reshape(nk * d, nk * d)
    big[np.diag_indices_from(big)] += 1.0
    return big, kb


def solve_fredholm(
    kernel: TrackingKernel, forcing: Forcing, grid: TimeGrid
) -> CostateTrajectory:
    """Nystrom solve of p + int_tau^T Ktilde(t,r) BB* p(r) dr = Y."""
    if forcing.start_index != kernel.start_index:
        raise ConfigurationError("kernel and forcing live on different windows")
    big, _ = _nystrom_matrix(kernel, grid)
    try:
        sol = lu_solve(lu_factor(big), forcing.values.reshape(-1))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - valid inputs never hit
        raise SingularSystemError(f"Nystrom system is singular: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("Nystrom solve produced non-finite values")
    d = kernel.ktilde.shape[2]
    return CostateTrajectory(kernel.start_index, sol.reshape(-1, d))


def resolvent(kernel: TrackingKernel, grid: TimeGrid) -> ResolventKernel:
    """Resolvent R solving R(t,r) + int Ktilde(t,v) BB* R(v,r) dv = Ktilde(t,r) BB*.

    One dense factorization is reused for all column right-hand sides.
    """
    big, kb = _nystrom_matrix(kernel, grid)
    nk = kb.shape[0]
    d = kb.shape[2]
    rhs = kb.transpose(0, 2, 1, 3).reshape(nk * d, nk * d)
    try:
        sol = lu_solve(lu_factor(big), rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SingularSystemError(f"Nystrom system is singular: {exc}") from exc
    values = sol.reshape(nk, d, nk, d).transpose(0, 2, 1, 3)
    return ResolventKernel(kernel.start_index, values)


def optimal_control_fredholm(p: CostateTrajectory, B: np.ndarray) -> ControlSignal:
    """u(t) = -B* p(t), node by node."""
    return ControlSignal(p.start_index, -(p.values @ np.asarray(B, dtype=float)))


def _row_weight_matrix(nk: int, h: float) -> np.ndarray:
    """W[i, q] = trapezoid weight of node q on the window [t_i, T] (0 for q < i)."""
    W = np.zeros((nk, nk))
    for i in range(nk):
        W[i, i:] = trapezoid_weights(nk - i, h)
    return W


def _tail_convolution(
    sys: SystemSpec, Zv: np.ndarray, grid: TimeGrid, k: int
) -> np.ndarray:
    """E[s, v] = int_tau^{t_s} Z*(t_s - r) N(r - t_v) dr for v = 0..k, s = k..n."""
    n, d, h = grid.steps, sys.d, grid.h
    nk = n - k + 1
    NT = sys.N[np.arange(k, n + 1)[:, None] - np.arange(k + 1)[None, :]]
    E = np.zeros((nk, k + 1, d, d))
    for il in range(1, nk):
        wts = trapezoid_weights(il + 1, h)
        Zrev = np.transpose(Zv[il::-1], (0, 2, 1))  # Z*(t_s - r), r = tau..t_s
        E[il] = np.einsum("rab,rvbc,r->vac", Zrev, NT[: il + 1], wts, optimize=True)
    return E


def synthesis_kernels(
    sys: SystemSpec,
    Z: FundamentalMatrix,
    R: ResolventKernel,
    grid: TimeGrid,
    start_index: int | None = None,
) -> SynthesisKernels:
    """Assemble the Q and H kernels of the closed-form optimal pair.

    The costate splits as p = Q0 head + int Q1 tail + int Q2 y and the
    optimal trajectory as w = H0 head + int H1 tail + int H2 y; all six
    maps are built from the resolvent with the shared trapezoid weights,
    so applying them reproduces the Nystrom solve to round-off.
    """
    k = R.start_index if start_index is None else start_index
    if k != R.start_index:
        raise ConfigurationError("resolvent was built for a different start node")
    sys.check_grid(grid)
    n, d, h = grid.steps, sys.d, grid.h
    nk = n - k + 1
    Zv = Z.values
    Rv = R.values
    w = grid.weights(k)
    bbt = sys.B @ sys.B.T

    ktilde = build_kernel(sys, Z, grid, k).ktilde
    rw = Rv * w[None, :, None, None]

    # costate maps
    q0 = ktilde[:, 0] - np.einsum("ijab,jbc->iac", rw, ktilde[:, 0], optimize=True)
    e_tail = _tail_convolution(sys, Zv, grid, k)
    q1a = np.zeros((nk, k + 1, d, d))
    ZCC = Zv @ (sys.C.T @ sys.C)
    for il in range(nk - 1):
        wts = trapezoid_weights(nk - il, h)
        q1a[il] = np.einsum(
            "sab,svbc,s->vac", ZCC[: nk - il], e_tail[il:], wts, optimize=True
        )
    q1 = q1a - np.einsum("ijab,jvbc->ivac", rw, q1a, optimize=True)
    rowW = _row_weight_matrix(nk, h)
    zc = Zv[:nk] @ sys.C.T  # Z(s-t) C*, by lag
    q2a = np.zeros((nk, nk, d, sys.p))
    for i in range(nk):
        q2a[i, i:] = rowW[i, i:, None, None] * zc[: nk - i]
    q2 = -q2a + np.einsum("iqab,qjbc->ijac", rw, q2a, optimize=True)

    # trajectory maps: substitute u = -B* p into the variation of constants
    zt2 = np.zeros((nk, nk, d, d))
    for i in range(nk):
        zt2[i, : i + 1] = np.transpose(Zv[i::-1], (0, 2, 1))
    lowW = np.zeros((nk, nk))
    for i in range(1, nk):
        lowW[i, : i + 1] = trapezoid_weights(i + 1, h)
    prop = np.einsum("iq,iqab,bc->iqac", lowW, zt2, bbt, optimize=True)
    h0 = np.transpose(Zv[:nk], (0, 2, 1)) - np.einsum(
        "iqab,qbc->iac", prop, q0, optimize=True
    )
    h1 = e_tail - np.einsum("iqab,qvbc->ivac", prop, q1, optimize=True)
    h2 = -np.einsum("iqab,qjbc->ijac", prop, q2, optimize=True)
    return SynthesisKernels(k, h, sys.B.copy(), q0, q1, q2, h0, h1, h2)


def apply_synthesis(
    kernels: SynthesisKernels, xi: InitialState, y: ReferenceSignal
) -> tuple[ControlSignal, StateTrajectory]:
    """Evaluate the optimal pair (u, w) from the Q/H maps."""
    k = kernels.start_index
    if xi.tau_index != k:
        raise ConfigurationError("state node differs from the synthesis node")
    wt = trapezoid_weights(k + 1, kernels.h)
    ysub = y.values[k:]
    bracket = (
        np.einsum("iab,b->ia", kernels.q0, xi.head)
        + np.einsum("ivab,vb,v->ia", kernels.q1, xi.tail, wt)
        + np.einsum("ijab,jb->ia", kernels.q2, ysub)
    )
    u = -(bracket @ kernels.input_matrix)
    wvals = (
        np.einsum("iab,b->ia", kernels.h0, xi.head)
        + np.einsum("ivab,vb,v->ia", kernels.h1, xi.tail, wt)
        + np.einsum("ijab,jb->ia", kernels.h2, ysub)
    )
    n = k + wvals.shape[0] - 1
    full = np.zeros((n + 1, xi.d))
    full[:k] = xi.tail[:k]
    full[k:] = wvals
    return ControlSignal(k, u), StateTrajectory(k, full)


def costate_residual(
    sys: SystemSpec,
    p: CostateTrajectory,
    wplus: StateTrajectory,
    y: ReferenceSignal,
    grid: TimeGrid,
) -> float:
    """Max-node residual of the costate differential equation.

    Checks p' = -A* p - int_t^T N*(s-t) p(s) ds - C*(C w - y) with a
    second-order finite-difference p'; the residual shrinks at least
    linearly in h.
    """
    k, n, h = p.start_index, grid.steps, grid.h
    pv = p.values
    nk = n - k + 1
    if nk < 3:
        raise ConfigurationError("need at least three nodes for the residual stencil")
    dp = np.empty_like(pv)
    dp[1:-1] = (pv[2:] - pv[:-2]) / (2.0 * h)
    dp[0] = (-3.0 * pv[0] + 4.0 * pv[1] - pv[2]) / (2.0 * h)
    dp[-1] = (3.0 * pv[-1] - 4.0 * pv[-2] + pv[-3]) / (2.0 * h)
    res = 0.0
    outer = (wplus.values[k:] @ sys.C.T - y.values[k:]) @ sys.C
    for il in range(nk):
        wts = trapezoid_weights(nk - il, h)
        mem = np.einsum("sba,sb,s->a", sys.N[: nk - il], pv[il:], wts)
        rhs = -sys.A.T @ pv[il] - mem - outer[il]
        res = max(res, float(np.abs(dp[il] - rhs).max()))
    return res
