"""Jump size, long-run variance and Monte-Carlo confidence intervals for refined change points.

Normal variates come from ``numpy.random.Generator(PCG64)`` with the default
ziggurat ``standard_normal``. Replicate ``b`` of a run seeded with ``seed``
draws from ``SeedSequence([seed, b]).spawn(2)`` (one child stream per side of
the two-sided walk), so samples do not depend on scheduling or thread count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError
from .fgrid import FunctionalSeries, Grid, check_on_grid
from .regress import FitCache, LambdaRule, SegmentFit, cached_fit

__all__ = [
    "RNG_SCHEME",
    "CovarianceOperator",
    "InferenceResult",
    "sample_cov",
    "estimate_kappa_sq",
    "lrv_blocks",
    "block_lrv",
    "lrv",
    "default_q",
    "default_k_max",
    "simulate_argmin",
    "confidence_interval",
]

RNG_SCHEME = "numpy-PCG64/SeedSequence([seed,b]).spawn(2)/ziggurat-v1"

K_MAX_CAP = 2_000_000


@dataclass(frozen=True, eq=False)
class CovarianceOperator:
    """Second-moment function of the curves in ``segment`` sampled on the grid."""

    matrix: np.ndarray
    grid: Grid
    segment: tuple[int, int] | None = None

    def quadratic(self, f: np.ndarray, g: np.ndarray | None = None) -> float:
        """``Sigma[f, g] = iint f(u) Sigma(u, v) g(v) du dv`` by quadrature."""
        f = check_on_grid(f, self.grid, "f")
        fw = self.grid.weights * f
        gw = fw if g is None else self.grid.weights * check_on_grid(g, self.grid, "g")
        return float(fw @ self.matrix @ gw)


def sample_cov(series: FunctionalSeries, segment: tuple[int, int]) -> CovarianceOperator:
    """Uncentered sample covariance ``(1/m) sum_t X_t(u) X_t(v)`` over ``(s, e]``."""
    s, e = segment
    if not 0 <= s < e <= series.n:
        raise InvalidArgumentError(f"empty or invalid segment ({s}, {e}]")
    Xs = series.X[s:e]
    C = Xs.T @ Xs / (e - s)
    return CovarianceOperator(matrix=0.5 * (C + C.T), grid=series.grid, segment=(s, e))


def estimate_kappa_sq(
    fit_left: SegmentFit, fit_right: SegmentFit, cov: CovarianceOperator
) -> float:
    """Plug-in squared jump size ``Sigma_hat[b_L - b_R, b_L - b_R]``."""
    if fit_left.grid.p != cov.grid.p or fit_right.grid.p != cov.grid.p:
        raise InvalidArgumentError("fits and covariance live on different grids")
    return max(0.0, cov.quadratic(fit_left.slope - fit_right.slope))


def default_q(refined_intervals) -> int:
    """Block half-width ``ceil(max(e_k - s_k) ** 0.4 / 2)``."""
    spans = [e - s for s, e in refined_intervals]
    if not spans:
        raise InvalidArgumentError("need at least one refined interval")
    return max(1, math.ceil(max(spans) ** 0.4 / 2))


def lrv_blocks(n: int, q: int, refined_etas) -> list[tuple[int, int]]:
    """Disjoint blocks ``(2q(i-1), 2qi]`` that survive the change-point exclusion.

    Block indices ``floor(eta/2q) - 1``, ``floor(eta/2q)`` and
    ``floor(eta/2q) + 1`` are removed for every refined estimate ``eta``.
    """
    if q < 1:
        raise InvalidArgumentError("q must be a positive integer")
    width = 2 * q
    excluded = set()
    for eta in refined_etas:
        c = int(eta) // width
        excluded.update((c - 1, c, c + 1))
    return [
        (width * (i - 1), width * i)
        for i in range(1, n // width + 1)
        if i not in excluded
    ]


def block_lrv(z: np.ndarray, q: int, blocks) -> float:
    """Average of squared differenced block sums of the stream ``z``.

    For each block ``(m, m+2q]``, ``F = sqrt(2/q) * sum_{j=m+1}^{m+q} (z_j - z_{j+q})``.
    ``z`` is indexed by time, i.e. ``z[j-1]`` holds ``z_j``. The reduction is
    exact (``math.fsum``) so block order does not matter.
    """
    blocks = list(blocks)
    if not blocks:
        raise InsufficientDataError("no blocks survive for long-run variance estimation")
    z = np.asarray(z, dtype=float)
    scale = math.sqrt(2.0 / q)
    squares = []
    for m, end in blocks:
        if end - m != 2 * q:
            raise InvalidArgumentError(f"block ({m}, {end}] does not have length 2q={2 * q}")
        first = z[m : m + q]
        second = z[m + q : m + 2 * q]
        F = scale * math.fsum(first - second)
        squares.append(F * F)
    return math.fsum(squares) / len(squares)


def lrv(
    series: FunctionalSeries,
    kappa_hat: float,
    fit_left: SegmentFit,
    fit_right: SegmentFit,
    refined_etas,
    q: int,
    lambda_rule: LambdaRule,
    cache: FitCache | None = None,
    kernel=None,
) -> float:
    """Block estimate of the long-run variance for one change point.

    In each surviving block a fresh slope is fitted (penalty from
    ``lambda_rule`` at the block length ``2q``) and
    ``Z_j = <X_j, b_L - b_R> (y_j - <X_j, b_block>) / kappa_hat`` is formed.
    """
    if not kappa_hat > 0:
        raise InvalidArgumentError("kappa_hat must be positive")
    if q < 2:
        raise InvalidArgumentError("q must be at least 2")
    blocks = lrv_blocks(series.n, q, refined_etas)
    if not blocks:
        raise InsufficientDataError(
            f"no blocks of length {2 * q} survive around change points {list(refined_etas)}"
        )
    w = series.grid.weights
    direction = fit_left.slope - fit_right.slope
    z = np.zeros(series.n)
    for m, end in blocks:
        fit = cached_fit(series, (m, end), lambda_rule, cache, kernel)
        Xw = series.X[m:end] * w
        z[m:end] = (Xw @ direction) * (series.y[m:end] - Xw @ fit.slope) / kappa_hat
    return block_lrv(z, q, blocks)


def default_k_max(sigma_sq: float, n: int) -> int:
    """Steps per side of the simulated walk: ``min(ceil(n max(5, 30 sigma^2)), 2e6)``."""
    return int(min(math.ceil(n * max(5.0, 30.0 * sigma_sq)), K_MAX_CAP))


def _argmin_one(sigma: float, n: int, k_max: int, seed: int, b: int) -> float:
    pos_ss, neg_ss = np.random.SeedSequence([seed, b]).spawn(2)
    scale = sigma / math.sqrt(n)
    steps = np.arange(1, k_max + 1) / n
    best_k, best_v = 0, 0.0
    for sign, ss in ((-1, neg_ss), (1, pos_ss)):
        z = np.random.Generator(np.random.PCG64(ss)).standard_normal(k_max)
        obj = steps + scale * np.cumsum(z)
        i = int(np.argmin(obj))
        v = float(obj[i])
        # smaller value wins; equal values keep the earlier (smaller |r|, negative side)
        if v < best_v or (v == best_v and i + 1 < abs(best_k)):
            best_k, best_v = sign * (i + 1), v
    return best_k / n


def simulate_argmin(
    sigma_hat: float,
    n: int,
    B: int,
    seed: int = 0,
    k_max: int | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Draw ``B`` minimizers of ``|r| + sigma_hat * W(r)`` for a two-sided walk ``W``.

    ``W(k/n)`` is the sum of ``|k|`` i.i.d. standard normals scaled by
    ``n ** -0.5``; the search covers ``|k| <= k_max`` steps per side.
    Ties go to the smallest ``|r|``, then to the negative side.
    """
    if B < 1:
        raise InvalidArgumentError("B must be at least 1")
    if not sigma_hat >= 0 or not math.isfinite(sigma_hat):
        raise InvalidArgumentError("sigma_hat must be finite and nonnegative")
    if n < 1:
        raise InvalidArgumentError("n must be positive")
    if sigma_hat == 0:
        return np.zeros(B)
    if k_max is None:
        k_max = default_k_max(sigma_hat**2, n)
    seed = int(seed)
    work = lambda b: _argmin_one(float(sigma_hat), n, k_max, seed, b)
    if threads > 1 and B > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(work, range(B)))
    else:
        out = [work(b) for b in range(B)]
    return np.asarray(out)


def confidence_interval(
    eta_tilde: float, kappa_sq_hat: float, samples: np.ndarray, alpha: float
) -> tuple[float, float]:
    """``[eta + q(alpha/2)/kappa^2, eta + q(1-alpha/2)/kappa^2]`` from empirical quantiles."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise InvalidArgumentError("need at least one Monte-Carlo sample")
    if not 0 < alpha < 1:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    if not kappa_sq_hat > 0:
        raise InvalidArgumentError("kappa_sq_hat must be positive")
    if np.all(samples == samples[0]):
        warnings.warn("degenerate Monte-Carlo samples give a zero-width interval", RuntimeWarning)
    q_lo, q_hi = np.quantile(samples, [alpha / 2, 1 - alpha / 2])
    return eta_tilde + q_lo / kappa_sq_hat, eta_tilde + q_hi / kappa_sq_hat


@dataclass(frozen=True, eq=False)
class InferenceResult:
    """Inference for the ``k``-th change point; ``interval`` is in index units."""

    k: int
    eta_tilde: int
    kappa_sq_hat: float
    sigma_inf_sq_hat: float
    q: int
    alpha: float
    argmin_samples: np.ndarray
    interval: tuple[float, float]
    degenerate: bool = False

    @property
    def width(self) -> float:
        q_lo, q_hi = np.quantile(self.argmin_samples, [self.alpha / 2, 1 - self.alpha / 2])
        return float((q_hi - q_lo) / self.kappa_sq_hat)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "eta_tilde": self.eta_tilde,
            "kappa_sq": self.kappa_sq_hat,
            "sigma_inf_sq": self.sigma_inf_sq_hat,
            "q": self.q,
            "alpha": self.alpha,
            "ci": [float(self.interval[0]), float(self.interval[1])],
            "degenerate": self.degenerate,
        }
