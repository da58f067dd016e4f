"""Penalized functional linear regression on an index segment.

Two equivalent solvers live here:

* :func:`fit_slope` solves the representer system ``(M + m*lam*I) c = y`` for a
  single segment and returns a full :class:`SegmentFit`.
* :class:`RidgeScanner` solves the same problem in the primal (feature) form
  ``min_g ||y - F g||^2 + m*lam*||g||^2`` where ``F F^T = M``. Second moments of
  the features are accumulated along the series, so the residual sums of
  squares of every split ``(s, t]``, ``(t, e]`` of an interval are obtained
  without forming any ``m x m`` system. The scan statistic uses this path.
"""

from __future__ import annotations

import math
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, SegmentTooShort, SingularSystemError
from .fgrid import FunctionalSeries, Grid, check_on_grid
from .kernel import GramMatrix, Kernel, gram, kernel_operator, sobolev_kernel

__all__ = [
    "LambdaRule",
    "SegmentFit",
    "FitCache",
    "RidgeScanner",
    "fit_slope",
    "predict",
    "segment_rss",
]

# singular values of the stacked features below this fraction of the largest are dropped
_RANK_RTOL = 1e-10
_T_CHUNK = 64


@dataclass(frozen=True)
class LambdaRule:
    """How the penalty depends on the segment length ``m``.

    ``kind="constant"`` uses ``value`` for every segment; ``kind="omega"`` uses
    ``value * m ** (-2r / (2r + 1))``.
    """

    kind: str = "constant"
    value: float = 0.2
    r: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "omega"):
            raise InvalidArgumentError(f"unknown lambda rule {self.kind!r}")
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise InvalidArgumentError("lambda value must be finite and nonnegative")
        if self.kind == "omega" and self.r <= 0:
            raise InvalidArgumentError("smoothness exponent r must be positive")

    @classmethod
    def constant(cls, lam: float) -> "LambdaRule":
        return cls("constant", float(lam))

    @classmethod
    def omega(cls, omega: float, r: float = 1.0) -> "LambdaRule":
        return cls("omega", float(omega), float(r))

    def __call__(self, m: int) -> float:
        if self.kind == "constant":
            return self.value
        return self.value * float(m) ** (-2.0 * self.r / (2.0 * self.r + 1.0))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "r": self.r}


@dataclass(frozen=True, eq=False)
class SegmentFit:
    """Penalized slope estimate on the segment ``(s, e]``.

    Attributes
    ----------
    coeffs : ndarray
        Representer coefficients ``c``; the slope is ``sum_j c_j L_K X_j``.
    slope : ndarray
        The slope function on the grid.
    fitted : ndarray
        In-segment fitted values ``M c``.
    pseudo_inverse : bool
        True when the unpenalized system was solved by pseudo-inverse.
    """

    segment: tuple[int, int]
    lam: float
    coeffs: np.ndarray
    slope: np.ndarray
    fitted: np.ndarray
    rss: float
    grid: Grid
    penalty: float = 0.0
    pseudo_inverse: bool = False

    @property
    def m(self) -> int:
        return self.segment[1] - self.segment[0]

    @property
    def objective(self) -> float:
        return self.rss / self.m + self.lam * self.penalty


def fit_slope(
    series: FunctionalSeries,
    segment: tuple[int, int],
    lam: float,
    gram_matrix: GramMatrix | None = None,
    kernel: Kernel | None = None,
    pseudo_inverse: bool = False,
) -> SegmentFit:
    """Fit the penalized slope on ``(s, e]`` via the representer theorem.

    Solves ``(M + m*lam*I) c = y_seg``, which minimizes
    ``(1/m) sum (y_j - <X_j, beta>)^2 + lam * ||beta||_K^2`` over the span of
    the kernel-smoothed covariates.

    With ``lam == 0`` a rank-deficient ``M`` raises :class:`SingularSystemError`
    unless ``pseudo_inverse=True``, in which case the minimum-norm solution is
    returned and flagged on the fit.
    """
    kernel = kernel or sobolev_kernel()
    s, e = segment
    if not 0 <= s < e <= series.n:
        raise InvalidArgumentError(f"invalid segment ({s}, {e}] for n={series.n}")
    if not (lam >= 0 and math.isfinite(lam)):
        raise InvalidArgumentError(f"penalty must be finite and nonnegative, got {lam}")
    if gram_matrix is None:
        gram_matrix = gram(kernel, series, segment)
    elif gram_matrix.segment != (s, e):
        raise InvalidArgumentError("Gram matrix belongs to a different segment")
    M = gram_matrix.entries
    m = e - s
    y = series.y[s:e]
    A = M + (m * lam) * np.eye(m)
    used_pinv = False
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
        c = scipy.linalg.cho_solve(factor, y, check_finite=False)
        if lam == 0:
            cond = np.linalg.cond(A)
            if not cond < 1.0 / (m * np.finfo(float).eps):
                raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        cond = float(np.linalg.cond(A)) if np.all(np.isfinite(A)) else math.inf
        if lam > 0 or not pseudo_inverse:
            raise SingularSystemError(
                f"penalized system on ({s}, {e}] with lambda={lam} is singular", cond
            ) from None
        c = np.linalg.pinv(A, hermitian=True) @ y
        used_pinv = True
        warnings.warn(
            f"unpenalized fit on ({s}, {e}] solved by pseudo-inverse", RuntimeWarning
        )
    op = kernel_operator(kernel, series.grid)
    fitted = M @ c
    resid = y - fitted
    slope = op.matrix @ (series.grid.weights * (series.X[s:e].T @ c))
    return SegmentFit(
        segment=(s, e),
        lam=float(lam),
        coeffs=c,
        slope=slope,
        fitted=fitted,
        rss=float(resid @ resid),
        grid=series.grid,
        penalty=float(c @ fitted),
        pseudo_inverse=used_pinv,
    )


def predict(fit: SegmentFit, x_new: np.ndarray) -> float | np.ndarray:
    """``<x_new, slope>`` for one curve, or a vector of them for a batch of rows."""
    x_new = check_on_grid(x_new, fit.grid, "x_new")
    return (x_new * fit.grid.weights) @ fit.slope if x_new.ndim > 1 else float(
        np.sum(fit.grid.weights * (x_new * fit.slope))
    )


class FitCache:
    """Thread-safe LRU cache of segment fits keyed by ``(s, e, lam)``."""

    def __init__(self, capacity: int = 512):
        if capacity < 1:
            raise InvalidArgumentError("cache capacity must be positive")
        self.capacity = capacity
        self._data: OrderedDict[tuple, SegmentFit] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key):
        with self._lock:
            fit = self._data.get(key)
            if fit is None:
                self.misses += 1
                return None
            self._data.move_to_end(key)
            self.hits += 1
            return fit

    def put(self, key, fit: SegmentFit) -> None:
        with self._lock:
            self._data[key] = fit
            self._data.move_to_end(key)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def __len__(self) -> int:
        return len(self._data)


def cached_fit(
    series: FunctionalSeries,
    segment: tuple[int, int],
    lambda_rule: LambdaRule,
    cache: FitCache | None = None,
    kernel: Kernel | None = None,
) -> SegmentFit:
    s, e = segment
    lam = lambda_rule(e - s)
    key = (s, e, lam)
    if cache is not None:
        fit = cache.get(key)
        if fit is not None:
            return fit
    fit = fit_slope(series, segment, lam, kernel=kernel)
    if cache is not None:
        cache.put(key, fit)
    return fit


def segment_rss(
    series: FunctionalSeries,
    segment: tuple[int, int],
    lambda_rule: LambdaRule,
    cache: FitCache | None = None,
    kernel: Kernel | None = None,
) -> float:
    """Residual sum of squares of the penalized fit on ``segment``."""
    if segment[1] - segment[0] < 1:
        raise InvalidArgumentError("segment must contain at least one index")
    return cached_fit(series, segment, lambda_rule, cache, kernel).rss


class RidgeScanner:
    """Residual sums of squares of penalized fits for many segments of one series.

    The kernel features of the curves are projected onto their numerical row
    space once; the ridge problem restricted to that space has the same
    minimizer and residuals as the representer solve.
    """

    def __init__(
        self,
        series: FunctionalSeries,
        lambda_rule: LambdaRule,
        kernel: Kernel | None = None,
    ):
        self.series = series
        self.lambda_rule = lambda_rule
        self.kernel = kernel or sobolev_kernel()
        op = kernel_operator(self.kernel, series.grid)
        F = op.features(series.X)
        if F.size and np.any(F):
            _, sv, Vt = np.linalg.svd(F, full_matrices=False)
            k = int(np.count_nonzero(sv > _RANK_RTOL * sv[0]))
            self.basis = Vt[:k].T
        else:
            self.basis = np.zeros((F.shape[1], 0))
        self.G = F @ self.basis
        self.y = series.y
        self._yy = np.concatenate([[0.0], np.cumsum(self.y * self.y)])
        self._Gy = np.vstack([np.zeros(self.rank), np.cumsum(self.G * self.y[:, None], axis=0)])

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def _moments(self, s: int, e: int):
        G = self.G[s:e]
        return G.T @ G, self._Gy[e] - self._Gy[s], self._yy[e] - self._yy[s]

    @staticmethod
    def _ridge_rss(S, v, yy, mu):
        """RSS of ``min ||y - G g||^2 + mu ||g||^2`` from sufficient statistics.

        Works on a single system or a leading batch axis.
        """
        k = S.shape[-1]
        if k == 0:
            return yy
        A = S + mu[..., None, None] * np.eye(k) if np.ndim(mu) else S + mu * np.eye(k)
        g = np.linalg.solve(A, v[..., None])[..., 0]
        # (S + mu I) g = v  =>  g'Sg = g'v - mu |g|^2
        return yy - np.sum(g * v, axis=-1) - np.asarray(mu) * np.sum(g * g, axis=-1)

    def rss(self, s: int, e: int) -> float:
        if not 0 <= s < e <= self.series.n:
            raise InvalidArgumentError(f"invalid segment ({s}, {e}]")
        m = e - s
        mu = m * self.lambda_rule(m)
        S, v, yy = self._moments(s, e)
        if mu == 0:
            g, *_ = np.linalg.lstsq(self.G[s:e], self.y[s:e], rcond=None)
            r = self.y[s:e] - self.G[s:e] @ g
            return float(r @ r)
        return float(self._ridge_rss(S, v, yy, mu))

    def split_rss(self, s: int, e: int, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """RSS on ``(s, t]`` and ``(t, e]`` for every split point ``t`` in ``ts``."""
        ts = np.asarray(ts, dtype=int)
        if ts.size == 0:
            return np.zeros(0), np.zeros(0)
        if ts.min() <= s or ts.max() >= e:
            raise InvalidArgumentError("split points must satisfy s < t < e")
        lam = self.lambda_rule
        if any(lam(m) == 0 for m in (ts.min() - s, e - ts.max())):
            left = np.array([self.rss(s, int(t)) for t in ts])
            right = np.array([self.rss(int(t), e) for t in ts])
            return left, right
        k = self.rank
        S_all, v_all, yy_all = self._moments(s, e)
        G = self.G
        left = np.empty(ts.size)
        right = np.empty(ts.size)
        order = np.argsort(ts, kind="stable")
        sorted_ts = ts[order]
        S_run = np.zeros((k, k))
        pos = s
        for lo in range(0, sorted_ts.size, _T_CHUNK):
            chunk = sorted_ts[lo : lo + _T_CHUNK]
            gap = G[pos : chunk[0]]
            S_run = S_run + gap.T @ gap
            pos = int(chunk[0])
            # running G'G from pos up to each t in the chunk
            rows = G[pos : chunk[-1]]
            if rows.shape[0]:
                csum = np.cumsum(np.einsum("ti,tj->tij", rows, rows), axis=0)
                idx = chunk - pos - 1
                S_left = S_run[None] + np.where(
                    (idx >= 0)[:, None, None], csum[np.maximum(idx, 0)], 0.0
                )
                S_run = S_run + csum[-1]
            else:
                S_left = np.broadcast_to(S_run, (chunk.size, k, k))
            pos = int(chunk[-1])
            v_left = self._Gy[chunk] - self._Gy[s]
            yy_left = self._yy[chunk] - self._yy[s]
            m_left = chunk - s
            m_right = e - chunk
            mu_left = m_left * np.array([lam(int(m)) for m in m_left])
            mu_right = m_right * np.array([lam(int(m)) for m in m_right])
            sl = order[lo : lo + _T_CHUNK]
            left[sl] = self._ridge_rss(S_left, v_left, yy_left, mu_left)
            right[sl] = self._ridge_rss(
                S_all[None] - S_left, v_all[None] - v_left, yy_all - yy_left, mu_right
            )
        return left, right

    def fit_coefficients(self, s: int, e: int) -> np.ndarray:
        """Feature-space coefficients of the fit on ``(s, e]`` (in the compressed basis)."""
        m = e - s
        mu = m * self.lambda_rule(m)
        S, v, _ = self._moments(s, e)
        return np.linalg.solve(S + mu * np.eye(self.rank), v)
