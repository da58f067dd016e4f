"""Reproducing kernels and the segment Gram matrices of the representer solver."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError
from .fgrid import FunctionalSeries, Grid, check_on_grid

__all__ = [
    "Kernel",
    "GramMatrix",
    "KernelOperator",
    "sobolev_kernel",
    "kernel_matrix",
    "kernel_smooth",
    "gram",
    "kernel_operator",
]

# relative tolerance for negative eigenvalues of a discretized kernel
PSD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Kernel:
    """A symmetric nonnegative definite kernel on [0, 1]^2.

    ``evaluator`` must accept broadcastable arrays ``(s, t)`` and return an
    array of kernel values.
    """

    name: str
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, s, t):
        return self.evaluator(np.asarray(s, dtype=float), np.asarray(t, dtype=float))


def _sobolev_w21(s: np.ndarray, t: np.ndarray) -> np.ndarray:
    if np.any((s < 0) | (s > 1) | (t < 0) | (t > 1)):
        raise InvalidArgumentError("Sobolev kernel is defined on [0, 1] x [0, 1]")
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    return np.cosh(lo) * np.cosh(1.0 - hi) / math.sinh(1.0)


_SOBOLEV = Kernel(name="sobolev-w21", evaluator=_sobolev_w21)


def sobolev_kernel() -> Kernel:
    """Reproducing kernel of the first-order Sobolev space W_2^1 on [0, 1].

    ``K(s, t) = cosh(min(s,t)) cosh(1 - max(s,t)) / sinh(1)``.
    """
    return _SOBOLEV


def kernel_matrix(kernel: Kernel, grid: Grid) -> np.ndarray:
    """The ``p x p`` matrix of kernel values at grid node pairs."""
    return kernel_operator(kernel, grid).matrix


def kernel_smooth(kernel: Kernel, f: np.ndarray, grid: Grid) -> np.ndarray:
    """Apply the kernel integral operator, ``(L_K f)(u_i) = sum_j w_j K(u_i, u_j) f_j``.

    Works on a single curve or on a batch with one curve per row.
    """
    f = check_on_grid(f, grid, "f")
    K = kernel_matrix(kernel, grid)
    return (f * grid.weights) @ K.T


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Segment Gram matrix ``M_ij = <X_{s+i}, L_K X_{s+j}>`` for the segment ``(s, e]``."""

    entries: np.ndarray
    segment: tuple[int, int]

    @property
    def m(self) -> int:
        return self.entries.shape[0]


def gram(
    kernel: Kernel, series: FunctionalSeries, segment: tuple[int, int]
) -> GramMatrix:
    """Gram matrix of the covariate curves in ``(s, e]`` under ``kernel``.

    Computed as ``A W K W A^T`` with ``A`` the curve matrix and ``W`` the
    quadrature weights.
    """
    s, e = segment
    if not 0 <= s < e <= series.n:
        raise InvalidArgumentError(f"invalid segment ({s}, {e}] for n={series.n}")
    op = kernel_operator(kernel, series.grid)
    AW = series.X[s:e] * series.grid.weights
    M = AW @ op.matrix @ AW.T
    M = 0.5 * (M + M.T)
    return GramMatrix(entries=M, segment=(s, e))


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Precomputed kernel matrix on a grid and its square-root factorization.

    With ``W^{1/2} K W^{1/2} = U D U^T``, the feature map
    ``phi(x) = x W^{1/2} U D^{1/2}`` satisfies ``<phi(x), phi(z)> = <x, L_K z>``,
    so a segment Gram matrix equals ``F F^T`` with ``F`` the stacked features.
    A slope with feature coefficients ``g`` is ``W^{-1/2} U D^{1/2} g`` on the grid.
    """

    kernel: Kernel
    grid: Grid
    matrix: np.ndarray
    feature_map: np.ndarray
    slope_map: np.ndarray
    clamped: int = field(default=0)

    @property
    def rank(self) -> int:
        return self.feature_map.shape[1]

    def features(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.feature_map

    def slope(self, g: np.ndarray) -> np.ndarray:
        return self.slope_map @ g


_OPERATORS: dict[tuple[int, int], KernelOperator] = {}
_OPERATORS_LOCK = threading.Lock()


def _build_operator(kernel: Kernel, grid: Grid) -> KernelOperator:
    nodes = grid.nodes
    K = kernel(nodes[:, None], nodes[None, :])
    K = np.asarray(K, dtype=float)
    if K.shape != (grid.p, grid.p):
        raise InvalidArgumentError("kernel evaluator returned a malformed matrix")
    if not np.allclose(K, K.T, rtol=1e-10, atol=1e-12 * np.abs(K).max()):
        raise InvalidArgumentError(f"kernel {kernel.name!r} is not symmetric")
    K = 0.5 * (K + K.T)
    sw = np.sqrt(grid.weights)
    Kt = sw[:, None] * K * sw[None, :]
    evals, evecs = np.linalg.eigh(Kt)
    tol = PSD_TOL * max(float(np.trace(Kt)), np.finfo(float).tiny)
    if evals.min() < -tol:
        raise InvalidArgumentError(
            f"kernel {kernel.name!r} is not positive semi-definite on this grid "
            f"(min eigenvalue {evals.min():.3e})"
        )
    keep = evals > 0
    clamped = int(np.count_nonzero(~keep))
    root = np.sqrt(evals[keep])
    U = evecs[:, keep]
    feature_map = sw[:, None] * U * root[None, :]
    slope_map = (U * root[None, :]) / sw[:, None]
    for arr in (K, feature_map, slope_map):
        arr.setflags(write=False)
    return KernelOperator(
        kernel=kernel,
        grid=grid,
        matrix=K,
        feature_map=feature_map,
        slope_map=slope_map,
        clamped=clamped,
    )


def kernel_operator(kernel: Kernel, grid: Grid) -> KernelOperator:
    """Return the shared, immutable operator for ``(kernel, grid)``, building it once."""
    key = (id(kernel), id(grid))
    op = _OPERATORS.get(key)
    if op is not None and op.kernel is kernel and op.grid is grid:
        return op
    with _OPERATORS_LOCK:
        op = _OPERATORS.get(key)
        if op is None or op.kernel is not kernel or op.grid is not grid:
            op = _build_operator(kernel, grid)
            if len(_OPERATORS) > 64:
                _OPERATORS.clear()
            _OPERATORS[key] = op
    return op
