import math

import numpy as np
import pytest

from voltrack import (
    InitialState,
    ReferenceSignal,
    SystemSpec,
    TimeGrid,
    exponential_kernel,
    zero_kernel,
)


def make_tracking_instance(n: int, tau_index: int = 0):
    """The fixed d=2, m=1, p=1 instance used throughout the suite.

    Exponential memory kernel N(t) = G exp(-t) with a seeded G, smooth
    reference, horizon T = 1.  The draw order is fixed so every grid
    sees the same plant.
    """
    rng = np.random.default_rng(12345)
    A = 0.6 * rng.normal(size=(2, 2))
    G = 0.8 * rng.normal(size=(2, 2))
    B = rng.normal(size=(2, 1))
    C = rng.normal(size=(1, 2))
    grid = TimeGrid(1.0, n)
    sys = SystemSpec(A, B, C, exponential_kernel(grid, [(G, 1.0)]))
    y = ReferenceSignal(
        (0.8 * np.sin(2.0 * np.pi * grid.nodes) + 0.3 * (1.0 - grid.nodes))[:, None]
    )
    if tau_index == 0:
        xi = InitialState(0, [0.9, -0.4])
    else:
        t = grid.nodes[: tau_index + 1]
        tail = np.stack([0.9 * np.cos(1.5 * t), -0.4 + 0.7 * t], axis=1)
        xi = InitialState(tau_index, tail[-1] + [0.05, -0.02], tail)
    return grid, sys, xi, y


def scalar_memoryless(n: int, a: float = 0.0, b: float = 1.0, c: float = 1.0):
    """d = m = p = 1 plant without memory (classical tracking limit)."""
    grid = TimeGrid(1.0, n)
    sys = SystemSpec([[a]], [[b]], [[c]], zero_kernel(grid, 1))
    return grid, sys


def rel_l2(grid: TimeGrid, k: int, a: np.ndarray, b: np.ndarray) -> float:
    w = grid.weights(k)
    num = math.sqrt(float(w @ ((a - b) ** 2).sum(axis=1)))
    den = math.sqrt(float(w @ (b**2).sum(axis=1)))
    return num / den if den > 0 else num


@pytest.fixture
def tracking_instance_100():
    return make_tracking_instance(100)
