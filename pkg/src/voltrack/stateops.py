"""Finite-memory state-space operators and discretized operator identities.

The running pair (current value, history) is represented as an element
of R^d x L^2(0, tau; R^d) with the history indexed by age: tail(s) is
the value at time tau - s, so a domain element satisfies tail(0) = head.
On this space the plant is the transport realization

    head' = A head + int_0^tau N(s) tail(s) ds + B u,
    tail' = -D_s tail,   tail(0) = head,

and the feedback synthesis becomes a differential identity for the
quadratic form of the Riccati operator and a linear identity for the
tracking element.  Both identities are checked here as discretized
residuals: quadratures are trapezoid sums, the age derivative D_s uses
second-order difference stencils, and the tau-derivative is a finite
difference across neighboring checkpointed slices with the test
elements re-sampled from their smooth generators at each node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, MissingCheckpointError
from .model import ReferenceSignal, SystemSpec, TimeGrid, trapezoid_weights
from .riccati import RiccatiField, TrackingField

__all__ = [
    "StateElement",
    "make_domain_element",
    "state_operator",
    "input_operator",
    "output_operator",
    "riccati_operator",
    "tracking_element",
    "state_inner",
    "riccati_operator_residual",
    "tracking_operator_residual",
]


@dataclass(frozen=True)
class StateElement:
    """Element (head, tail) of the age-indexed state space at one node.

    ``tail[i]`` is the history value at age s_i = i h, i = 0..tau_index.
    Elements produced by :func:`make_domain_element` keep their smooth
    generator so they can be re-sampled at neighboring nodes.
    """

    tau_index: int
    head: np.ndarray
    tail: np.ndarray = field(repr=False)
    seed: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        head = np.asarray(self.head, dtype=float).reshape(-1)
        tail = np.asarray(self.tail, dtype=float)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "tail", tail)
        if tail.shape != (self.tau_index + 1, head.size):
            raise ConfigurationError("tail must cover ages 0..tau with d channels")

    @property
    def d(self) -> int:
        return self.head.size


def make_domain_element(
    seed: Callable, tau_index: int, grid: TimeGrid
) -> StateElement:
    """Sample a smooth generator on ages 0..tau; tail(0) = head holds
    by construction."""
    ages = grid.nodes[: tau_index + 1]
    tail = np.atleast_2d(np.asarray([seed(s) for s in ages], dtype=float))
    if tail.ndim != 2 or tail.shape[0] != tau_index + 1:
        raise ConfigurationError("generator must return one d-vector per age")
    return StateElement(tau_index, tail[0].copy(), tail, seed=seed)


def state_operator(sys: SystemSpec, grid: TimeGrid, elem: StateElement) -> StateElement:
    """Action of the transport generator: memory-coupled head, -D_s tail."""
    k, h = elem.tau_index, grid.h
    if k < 2:
        raise ConfigurationError("age-derivative stencils need tau_index >= 2")
    wt = trapezoid_weights(k + 1, h)
    head = sys.A @ elem.head + np.einsum("iab,ib,i->a", sys.N[: k + 1], elem.tail, wt)
    t = elem.tail
    dt = np.empty_like(t)
    dt[1:-1] = (t[2:] - t[:-2]) / (2.0 * h)
    dt[0] = (-3.0 * t[0] + 4.0 * t[1] - t[2]) / (2.0 * h)
    dt[-1] = (3.0 * t[-1] - 4.0 * t[-2] + t[-3]) / (2.0 * h)
    return StateElement(k, head, -dt)


def input_operator(sys: SystemSpec, tau_index: int, u: np.ndarray) -> StateElement:
    """(B u, 0): controls enter through the head only."""
    return StateElement(
        tau_index, sys.B @ np.asarray(u, dtype=float), np.zeros((tau_index + 1, sys.d))
    )


def output_operator(sys: SystemSpec, elem: StateElement) -> np.ndarray:
    """C head: the output reads the current value only."""
    return sys.C @ elem.head


def riccati_operator(
    ric: RiccatiField, tau_index: int, elem: StateElement, p2: np.ndarray | None = None
) -> StateElement:
    """Action of the block operator [P0, P1-row; P1-col, P2] on an element.

    The age-indexed convention reverses the stored fields: the tail
    couplings use P1(tau - s, tau) and P2(tau - s, tau - v, tau).
    """
    j = tau_index
    if elem.tau_index != j:
        raise ConfigurationError("element node differs from the requested node")
    wt = trapezoid_weights(j + 1, ric.grid.h)
    S = ric.p2_slice(j) if p2 is None else p2
    p1rev = ric.p1[j::-1, j]
    head = ric.p0[j] @ elem.head + np.einsum(
        "iab,ib,i->a", p1rev, elem.tail, wt
    )
    tail = np.einsum("iba,b->ia", p1rev, elem.head) + np.einsum(
        "ilab,lb,l->ia", S[::-1, ::-1], elem.tail, wt, optimize=True
    )
    return StateElement(j, head, tail)


def tracking_element(trk: TrackingField, tau_index: int) -> StateElement:
    """The pair (d1(tau), d2(tau - ., tau)) as an age-indexed element."""
    j = tau_index
    return StateElement(j, trk.d1[j].copy(), trk.d2[j::-1, j].copy())


def state_inner(grid: TimeGrid, a: StateElement, b: StateElement) -> float:
    """Inner product: head dot head plus the trapezoid tail pairing."""
    if a.tau_index != b.tau_index:
        raise ConfigurationError("elements live at different nodes")
    wt = trapezoid_weights(a.tau_index + 1, grid.h)
    return float(a.head @ b.head + np.einsum("i,ia,ia->", wt, a.tail, b.tail))


def _checkpoint_neighbors(ric: RiccatiField, j: int) -> tuple[int | None, int | None]:
    if j not in ric.checkpoints:
        raise MissingCheckpointError(
            f"node {j} is not checkpointed; solve with a matching checkpoint spacing"
        )
    keys = sorted(ric.checkpoints)
    pos = keys.index(j)
    prev = keys[pos - 1] if pos > 0 else None
    nxt = keys[pos + 1] if pos + 1 < len(keys) else None
    if prev is None and nxt is None:
        raise MissingCheckpointError("no neighboring checkpoint for the tau-derivative")
    return prev, nxt


def _resample(elem: StateElement, j: int, grid: TimeGrid) -> StateElement:
    if elem.seed is None:
        raise ConfigurationError(
            "the tau-derivative needs generator-backed elements; "
            "build them with make_domain_element"
        )
    return make_domain_element(elem.seed, j, grid)


def riccati_operator_residual(
    ric: RiccatiField,
    sys: SystemSpec,
    tau_index: int,
    omega: StateElement,
    xi: StateElement,
) -> float:
    """Residual of the operator form of the feedback-synthesis identity.

    Evaluates d/dtau <Omega, P Xi> + <A Omega, P Xi> + <P Omega, A Xi>
    - <B* P Omega, B* P Xi> + <C Omega, C Xi> with the tau-derivative
    across neighboring checkpoints; first-order small in h.
    """
    grid = ric.grid
    j = tau_index
    prev, nxt = _checkpoint_neighbors(ric, j)

    def quad(c: int) -> float:
        om = _resample(omega, c, grid)
        xc = _resample(xi, c, grid)
        return state_inner(grid, om, riccati_operator(ric, c, xc))

    if prev is not None and nxt is not None:
        dterm = (quad(nxt) - quad(prev)) / (grid.nodes[nxt] - grid.nodes[prev])
    elif nxt is not None:
        dterm = (quad(nxt) - quad(j)) / (grid.nodes[nxt] - grid.nodes[j])
    else:
        dterm = (quad(j) - quad(prev)) / (grid.nodes[j] - grid.nodes[prev])

    om = _resample(omega, j, grid)
    xc = _resample(xi, j, grid)
    S = ric.p2_slice(j)
    p_om = riccati_operator(ric, j, om, p2=S)
    p_xc = riccati_operator(ric, j, xc, p2=S)
    a_om = state_operator(sys, grid, om)
    a_xc = state_operator(sys, grid, xc)
    total = (
        dterm
        + state_inner(grid, a_om, p_xc)
        + state_inner(grid, p_om, a_xc)
        - float((sys.B.T @ p_om.head) @ (sys.B.T @ p_xc.head))
        + float((sys.C @ om.head) @ (sys.C @ xc.head))
    )
    return abs(total)


def tracking_operator_residual(
    trk: TrackingField,
    ric: RiccatiField,
    sys: SystemSpec,
    tau_index: int,
    xi: StateElement,
    y: ReferenceSignal,
) -> float:
    """Residual of the operator form of the tracking equations.

    Checks d/dtau <d(tau), Xi> = -<d(tau), (A - B B* P) Xi> + <y, C Xi>
    with the same checkpoint-based tau-derivative; first-order small.
    """
    grid = ric.grid
    j = tau_index
    prev, nxt = _checkpoint_neighbors(ric, j)

    def pair(c: int) -> float:
        return state_inner(grid, tracking_element(trk, c), _resample(xi, c, grid))

    if prev is not None and nxt is not None:
        dterm = (pair(nxt) - pair(prev)) / (grid.nodes[nxt] - grid.nodes[prev])
    elif nxt is not None:
        dterm = (pair(nxt) - pair(j)) / (grid.nodes[nxt] - grid.nodes[j])
    else:
        dterm = (pair(j) - pair(prev)) / (grid.nodes[j] - grid.nodes[prev])

    xc = _resample(xi, j, grid)
    dj = tracking_element(trk, j)
    a_xc = state_operator(sys, grid, xc)
    p_head = riccati_operator(ric, j, xc).head
    rhs = (
        -state_inner(grid, dj, a_xc)
        + float(dj.head @ (sys.B @ (sys.B.T @ p_head)))
        + float(y.values[j] @ (sys.C @ xc.head))
    )
    return abs(dterm - rhs)
