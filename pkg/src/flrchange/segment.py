"""Seeded intervals and the likelihood-ratio scan statistic.

All intervals are half-open integer intervals ``(s, e]`` over time indices
``1..n``, stored as ``(s, e)`` tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidArgumentError, SegmentTooShort
from .fgrid import FunctionalSeries, check_on_grid
from .regress import FitCache, LambdaRule, RidgeScanner, segment_rss

__all__ = [
    "SeededIntervalSet",
    "ScanResult",
    "layer_count",
    "seeded_intervals",
    "w_stat",
    "w_curve",
    "scan_interval",
    "population_w",
]


def layer_count(n: int, delta: int) -> int:
    """``ceil(log2(n / delta)) + 1``, computed in exact integer arithmetic."""
    c = 0
    while (delta << c) < n:
        c += 1
    return c + 1


@dataclass(frozen=True)
class SeededIntervalSet:
    """Multi-resolution deterministic interval collection.

    Layer ``k`` (1-based) holds intervals of length about ``n / 2**(k-1)``
    whose starts are spaced ``n / 2**k`` apart.
    """

    n: int
    delta: int
    layers: tuple[tuple[tuple[int, int], ...], ...]
    dropped: int = 0
    intervals: tuple[tuple[int, int], ...] = field(init=False, repr=False)

    def __post_init__(self):
        seen: dict[tuple[int, int], None] = {}
        for layer in self.layers:
            for iv in layer:
                seen.setdefault(iv, None)
        object.__setattr__(self, "intervals", tuple(seen))

    @property
    def M(self) -> int:
        return len(self.layers)

    @property
    def last_layer(self) -> tuple[tuple[int, int], ...]:
        return self.layers[-1]

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def seeded_intervals(n: int, delta: int, keep_degenerate: bool = False) -> SeededIntervalSet:
    """Build the seeded intervals for a series of length ``n``.

    For layer ``k = 1..M`` with ``M = ceil(log2(n/delta)) + 1``, length
    ``l_k = n / 2**(k-1)`` and shift ``b_k = n / 2**k``, the intervals are
    ``(ceil((i-1) b_k), floor((i-1) b_k + l_k)]`` for ``i = 1..2**k - 1``.
    Intervals with ``e <= s + 1`` admit no split and are dropped (counted in
    ``dropped``) unless ``keep_degenerate`` is set.
    """
    if int(n) != n or int(delta) != delta:
        raise InvalidArgumentError("n and delta must be integers")
    n, delta = int(n), int(delta)
    if not 0 < delta < n:
        raise InvalidArgumentError(f"need 0 < delta < n, got delta={delta}, n={n}")
    M = layer_count(n, delta)
    layers = []
    dropped = 0
    for k in range(1, M + 1):
        length = Fraction(n, 2 ** (k - 1))
        shift = Fraction(n, 2**k)
        layer: dict[tuple[int, int], None] = {}
        for i in range(1, 2**k):
            s = _ceil((i - 1) * shift)
            e = _floor((i - 1) * shift + length)
            if e <= s + 1 and not keep_degenerate:
                dropped += 1
                continue
            layer.setdefault((s, e), None)
        layers.append(tuple(layer))
    return SeededIntervalSet(n=n, delta=delta, layers=tuple(layers), dropped=dropped)


@dataclass(frozen=True)
class ScanResult:
    """Maximum of the scan statistic over admissible split points of one interval."""

    interval: tuple[int, int]
    argmax_b: int
    max_value_a: float


def w_stat(
    series: FunctionalSeries,
    s: int,
    t: int,
    e: int,
    lambda_rule: LambdaRule,
    cache: FitCache | None = None,
    min_fit_len: int = 1,
    kernel=None,
) -> float:
    """Likelihood-ratio statistic ``rss(s,e] - rss(s,t] - rss(t,e]``.

    Each fit uses the penalty ``lambda_rule(length)`` of its own segment.
    Raises :class:`SegmentTooShort` when a piece is shorter than ``min_fit_len``.
    """
    if not 0 <= s < t < e <= series.n:
        raise InvalidArgumentError(f"need 0 <= s < t < e <= n, got ({s}, {t}, {e})")
    if min(t - s, e - t) < min_fit_len:
        raise SegmentTooShort(f"split ({s}, {t}, {e}) leaves a piece below {min_fit_len}")
    if not np.any(series.y[s:e]):
        return 0.0
    return (
        segment_rss(series, (s, e), lambda_rule, cache, kernel)
        - segment_rss(series, (s, t), lambda_rule, cache, kernel)
        - segment_rss(series, (t, e), lambda_rule, cache, kernel)
    )


def w_curve(scanner: RidgeScanner, s: int, e: int, margin: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Scan statistic at every ``t`` with ``s + margin <= t <= e - margin``.

    Returns ``(ts, values)``; both are empty when the interval is too short.
    """
    margin = max(1, int(margin))
    ts = np.arange(s + margin, e - margin + 1)
    if ts.size == 0:
        return ts, np.zeros(0)
    if not np.any(scanner.y[s:e]):
        return ts, np.zeros(ts.size)
    left, right = scanner.split_rss(s, e, ts)
    return ts, scanner.rss(s, e) - left - right


def scan_interval(scanner: RidgeScanner, interval: tuple[int, int], margin: int) -> ScanResult | None:
    """Maximize the statistic over the interval; ties go to the smallest ``t``."""
    ts, values = w_curve(scanner, interval[0], interval[1], margin)
    if ts.size == 0:
        return None
    i = int(np.argmax(values))
    return ScanResult(interval=tuple(interval), argmax_b=int(ts[i]), max_value_a=float(values[i]))


def population_w(
    beta_left: np.ndarray,
    beta_right: np.ndarray,
    cov,
    s: int,
    t: int,
    e: int,
    eta: int,
) -> float:
    """Population statistic for a single change from ``beta_left`` to ``beta_right`` at ``eta``.

    ``((t-s)(e-t)/(e-s)) * Sigma[b(s,t] - b(t,e], same]`` where ``b(a,b]`` is the
    average true slope over the segment. At ``t = eta`` this equals
    ``(eta-s)(e-eta)/(e-s) * kappa^2``.
    """
    if not s < t < e:
        raise InvalidArgumentError("need s < t < e")
    grid = cov.grid
    beta_left = check_on_grid(beta_left, grid, "beta_left")
    beta_right = check_on_grid(beta_right, grid, "beta_right")

    def average(a: int, b: int) -> np.ndarray:
        n_left = min(max(eta - a, 0), b - a)
        return (n_left * beta_left + (b - a - n_left) * beta_right) / (b - a)

    diff = average(s, t) - average(t, e)
    return (t - s) * (e - t) / (e - s) * cov.quadratic(diff)
