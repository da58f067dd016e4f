"""Synthetic functional regression series with piecewise-constant slopes.

Covariates are ``X_j = sum_m zeta_m Z_{m,j} phi_m`` with cosine eigenfunctions
``phi_1 = 1``, ``phi_{m+1} = sqrt(2) cos(m pi t)``, weights
``zeta_m = (-1)^{m+1} / m`` and independent stationary AR(1) scores ``Z_m``.
The slope alternates between

    beta0 = 4 sum_m (-1)^{m+1} m^-4 phi_m
    beta1 = (4 - c_beta) sum_m (-1)^{m+1} m^-2 phi_m

starting with ``beta0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidArgumentError
from .fgrid import FunctionalSeries, Grid, make_grid
from .inference import CovarianceOperator

__all__ = [
    "ScenarioSpec",
    "GroundTruth",
    "eigenfunction",
    "score_weights",
    "slope_coefficients",
    "kappa_sq_series",
    "population_cov",
    "generate",
    "scenario_presets",
]


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    p: int = 200
    change_points: tuple[int, ...] = ()
    c_beta: float = 1.0
    ar_coeff: float = 0.3
    n_terms: int = 50
    seed: int = 0

    def __post_init__(self):
        cps = tuple(int(c) for c in self.change_points)
        object.__setattr__(self, "change_points", cps)
        if self.n < 2 or self.p < 2 or self.n_terms < 1:
            raise InvalidArgumentError("need n >= 2, p >= 2 and n_terms >= 1")
        if any(not 0 < c < self.n for c in cps) or list(cps) != sorted(set(cps)):
            raise InvalidArgumentError(f"change points {cps} must be sorted, distinct, inside (0, n)")
        if not abs(self.ar_coeff) < 1:
            raise InvalidArgumentError("AR coefficient must satisfy |ar_coeff| < 1")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    change_points: tuple[int, ...]
    slope_segments: tuple[np.ndarray, ...]
    kappa_sq_true: tuple[float, ...]
    beta0: np.ndarray = field(repr=False)
    beta1: np.ndarray = field(repr=False)

    def slope_at(self, j: int) -> np.ndarray:
        """True slope at 1-based time ``j``."""
        return self.slope_segments[int(np.searchsorted(self.change_points, j, side="left"))]

    def to_dict(self, spec: ScenarioSpec) -> dict:
        return {
            "n": spec.n,
            "p": spec.p,
            "change_points": list(self.change_points),
            "kappa_sq": list(self.kappa_sq_true),
            "c_beta": spec.c_beta,
            "ar_coeff": spec.ar_coeff,
            "n_terms": spec.n_terms,
            "seed": spec.seed,
        }


def eigenfunction(m: int, grid: Grid) -> np.ndarray:
    """``phi_1 = 1`` and ``phi_m = sqrt(2) cos((m-1) pi t)`` for ``m >= 2``."""
    if m < 1:
        raise InvalidArgumentError("eigenfunction index starts at 1")
    if m == 1:
        return np.ones(grid.p)
    return math.sqrt(2.0) * np.cos((m - 1) * math.pi * grid.nodes)


def _basis(n_terms: int, grid: Grid) -> np.ndarray:
    return np.vstack([eigenfunction(m, grid) for m in range(1, n_terms + 1)])


def score_weights(n_terms: int = 50) -> np.ndarray:
    m = np.arange(1, n_terms + 1)
    return (-1.0) ** (m + 1) / m


def slope_coefficients(c_beta: float, n_terms: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Basis coefficients of ``beta0`` and ``beta1``."""
    m = np.arange(1, n_terms + 1, dtype=float)
    sign = (-1.0) ** (m + 1)
    return 4.0 * sign * m**-4, (4.0 - c_beta) * sign * m**-2


def kappa_sq_series(c_beta: float, n_terms: int = 50) -> float:
    """Population squared jump ``sum_m zeta_m^2 (b0_m - b1_m)^2``."""
    b0, b1 = slope_coefficients(c_beta, n_terms)
    return float(np.sum(score_weights(n_terms) ** 2 * (b0 - b1) ** 2))


def population_cov(grid: Grid, n_terms: int = 50) -> CovarianceOperator:
    """Covariance function ``sum_m zeta_m^2 phi_m(u) phi_m(v)`` on the grid."""
    Phi = _basis(n_terms, grid)
    z2 = score_weights(n_terms) ** 2
    return CovarianceOperator(matrix=(Phi.T * z2) @ Phi, grid=grid)


def generate(spec: ScenarioSpec) -> tuple[FunctionalSeries, GroundTruth]:
    """Simulate one series; identical specs (including seed) give identical data."""
    rng = np.random.default_rng(spec.seed)
    grid = make_grid(spec.p)
    a = spec.ar_coeff
    # stationary start, then Z_j = a Z_{j-1} + sqrt(1 - a^2) e_j
    z0 = rng.standard_normal(spec.n_terms)
    innov = rng.standard_normal((spec.n_terms, spec.n)) * math.sqrt(1.0 - a * a)
    Z, _ = lfilter([1.0], [1.0, -a], innov, axis=1, zi=(a * z0)[:, None])
    eps = rng.standard_normal(spec.n)

    Phi = _basis(spec.n_terms, grid)
    zeta = score_weights(spec.n_terms)
    X = (Z * zeta[:, None]).T @ Phi

    b0, b1 = slope_coefficients(spec.c_beta, spec.n_terms)
    beta0, beta1 = b0 @ Phi, b1 @ Phi
    bounds = (0, *spec.change_points, spec.n)
    segments = tuple(beta0 if k % 2 == 0 else beta1 for k in range(len(bounds) - 1))
    signal = np.empty(spec.n)
    for k, beta in enumerate(segments):
        s, e = bounds[k], bounds[k + 1]
        signal[s:e] = (X[s:e] * grid.weights) @ beta
    y = signal + eps

    kappa = kappa_sq_series(spec.c_beta, spec.n_terms)
    truth = GroundTruth(
        change_points=spec.change_points,
        slope_segments=segments,
        kappa_sq_true=tuple(kappa for _ in spec.change_points),
        beta0=beta0,
        beta1=beta1,
    )
    return FunctionalSeries(y, X, grid), truth


def scenario_presets(name: str, n: int, c_beta: float = 1.0, seed: int = 0, p: int = 200) -> ScenarioSpec:
    """``"S1"``: one change at ``n/2``; ``"S2"``: changes at ``n/4`` and ``5n/8``."""
    if name == "S1":
        cps = (n // 2,)
    elif name == "S2":
        cps = (n // 4, 5 * n // 8)
    else:
        raise InvalidArgumentError(f"unknown scenario {name!r}; expected 'S1' or 'S2'")
    return ScenarioSpec(n=n, p=p, change_points=cps, c_beta=c_beta, seed=seed)
