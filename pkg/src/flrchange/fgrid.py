"""Functions sampled on an evenly spaced grid over [0, 1], with trapezoid quadrature.

A grid function is a plain 1-d ``numpy`` array of length ``grid.p``; a batch
of curves is a 2-d array with one curve per row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["Grid", "FunctionalSeries", "make_grid", "inner_l2", "check_on_grid"]


@dataclass(frozen=True, eq=False)
class Grid:
    """Evenly spaced nodes on [0, 1] with trapezoid weights."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def p(self) -> int:
        return self.nodes.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.p == other.p

    def __hash__(self) -> int:
        return hash(("Grid", self.p))


def make_grid(p: int) -> Grid:
    """Build a grid of ``p`` evenly spaced nodes with trapezoid weights.

    Weights are ``h/2`` at the two ends and ``h`` elsewhere, ``h = 1/(p-1)``,
    so they sum to one.
    """
    if int(p) != p or p < 2:
        raise InvalidArgumentError(f"grid needs p >= 2 nodes, got {p!r}")
    p = int(p)
    nodes = np.linspace(0.0, 1.0, p)
    h = 1.0 / (p - 1)
    weights = np.full(p, h)
    weights[0] = weights[-1] = h / 2.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Grid(nodes=nodes, weights=weights)


def check_on_grid(values: np.ndarray, grid: Grid, name: str = "function") -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.p:
        raise InvalidArgumentError(
            f"{name} has {values.shape[-1]} samples but the grid has {grid.p} nodes"
        )
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return values


def inner_l2(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    """Quadrature approximation of the L2 inner product of ``f`` and ``g``."""
    f = check_on_grid(f, grid, "f")
    g = check_on_grid(g, grid, "g")
    # elementwise product commutes exactly, so the sum is symmetric bit for bit
    return float(np.sum(grid.weights * (f * g)))


@dataclass(frozen=True, eq=False)
class FunctionalSeries:
    """Scalar responses ``y`` paired with covariate curves ``X`` on a shared grid.

    ``X`` has shape ``(n, p)``; row ``j`` holds the curve observed at time
    ``j + 1`` (time indices are 1-based in every interval ``(s, e]``).
    """

    y: np.ndarray
    X: np.ndarray
    grid: Grid

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        X = np.array(self.X, dtype=float)
        if y.ndim != 1 or X.ndim != 2:
            raise InvalidArgumentError("y must be 1-d and X must be 2-d")
        if X.shape[0] != y.shape[0]:
            raise InvalidArgumentError(
                f"{y.shape[0]} responses but {X.shape[0]} covariate curves"
            )
        check_on_grid(X, self.grid, "X")
        if not np.all(np.isfinite(y)):
            raise InvalidArgumentError("y contains non-finite values")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def subset(self, index: np.ndarray) -> "FunctionalSeries":
        return FunctionalSeries(self.y[index], self.X[index], self.grid)
