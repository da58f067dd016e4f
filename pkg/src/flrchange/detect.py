"""Narrowest-over-threshold recursion over seeded intervals, and local refinement."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .fgrid import FunctionalSeries
from .kernel import Kernel
from .regress import FitCache, LambdaRule, RidgeScanner, SegmentFit, cached_fit
from .segment import ScanResult, SeededIntervalSet, scan_interval, seeded_intervals

__all__ = [
    "DetectorConfig",
    "PreliminarySet",
    "RefinedChangePoint",
    "scan_all",
    "frbs",
    "frbs_from_stats",
    "refined_interval",
    "refine",
    "q_objective",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectorConfig:
    """Tuning state for detection and inference.

    ``tau=None`` means ``2 * n**0.4``; ``delta=None`` means ``n // 10``.
    The scan only considers split points at least ``max(margin, min_fit_len)``
    away from either end of an interval.
    """

    lambda_rule: LambdaRule = field(default_factory=LambdaRule)
    tau: float | None = None
    delta: int | None = None
    margin: int = 10
    min_fit_len: int = 10
    q: int | None = None
    B: int = 2000
    alpha: float = 0.05
    seed: int = 0
    threads: int = 1
    cache_capacity: int = 512
    kernel: Kernel | None = None

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise InvalidArgumentError("threshold tau must be positive")
        if self.margin < 1 or self.min_fit_len < 1:
            raise InvalidArgumentError("margin and min_fit_len must be positive")
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError("alpha must lie in (0, 1)")
        if self.B < 1:
            raise InvalidArgumentError("B must be at least 1")
        if self.threads < 1:
            raise InvalidArgumentError("threads must be at least 1")

    @property
    def scan_margin(self) -> int:
        return max(self.margin, self.min_fit_len)

    def tau_for(self, n: int) -> float:
        return self.tau if self.tau is not None else 2.0 * n**0.4

    def delta_for(self, n: int) -> int:
        delta = self.delta if self.delta is not None else max(1, n // 10)
        if not 0 < delta < n:
            raise InvalidArgumentError(f"delta={delta} must satisfy 0 < delta < n={n}")
        return delta

    def to_dict(self, n: int | None = None) -> dict:
        d = asdict(self)
        d["lambda_rule"] = self.lambda_rule.to_dict()
        d["kernel"] = (self.kernel.name if self.kernel else "sobolev-w21")
        if n is not None:
            d["tau"] = self.tau_for(n)
            d["delta"] = self.delta_for(n)
        return d


@dataclass(frozen=True)
class PreliminarySet:
    """Preliminary change-point estimates and the interval scan that produced each."""

    estimators: tuple[int, ...]
    provenance: tuple[ScanResult, ...]

    def __len__(self) -> int:
        return len(self.estimators)


@dataclass(frozen=True, eq=False)
class RefinedChangePoint:
    """Refined estimate of the ``k``-th change within ``(s_k, e_k]``.

    ``degraded`` is set when a half-segment was shorter than ``min_fit_len``
    and the preliminary estimate was kept.
    """

    k: int
    s_k: int
    e_k: int
    eta_hat: int
    eta_tilde: int
    fit_left: SegmentFit
    fit_right: SegmentFit
    degraded: bool = False


def scan_all(
    series: FunctionalSeries,
    intervals: SeededIntervalSet,
    config: DetectorConfig,
    scanner: RidgeScanner | None = None,
) -> dict[tuple[int, int], ScanResult | None]:
    """Maximize the scan statistic on every seeded interval.

    Intervals are independent; with ``config.threads > 1`` they are scanned
    concurrently. The mapping is keyed by interval, so it does not depend on
    scheduling.
    """
    if intervals.n != series.n:
        raise InvalidArgumentError(
            f"intervals were built for n={intervals.n}, data has n={series.n}"
        )
    if scanner is None:
        scanner = RidgeScanner(series, config.lambda_rule, config.kernel)
    margin = config.scan_margin
    todo = list(intervals)
    if config.threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda iv: scan_interval(scanner, iv, margin), todo))
    else:
        results = [scan_interval(scanner, iv, margin) for iv in todo]
    return dict(zip(todo, results))


def frbs_from_stats(
    stats: dict[tuple[int, int], ScanResult | None], n: int, tau: float
) -> PreliminarySet:
    """Run the narrowest-over-threshold recursion on precomputed interval scans."""
    if not tau > 0:
        raise InvalidArgumentError("threshold tau must be positive")
    # shortest first, then leftmost, so the first admissible hit is the choice
    ranked = sorted(
        (r for r in stats.values() if r is not None and r.max_value_a > tau),
        key=lambda r: (r.interval[1] - r.interval[0], r.interval[0], r.interval[1]),
    )
    found: list[ScanResult] = []
    windows = [(0, n)]
    while windows:
        s, e = windows.pop()
        pick = next(
            (r for r in ranked if s <= r.interval[0] and r.interval[1] <= e), None
        )
        if pick is None:
            continue
        found.append(pick)
        b = pick.argmax_b
        windows.append((b, e))
        windows.append((s, b))
    found.sort(key=lambda r: r.argmax_b)
    return PreliminarySet(
        estimators=tuple(r.argmax_b for r in found), provenance=tuple(found)
    )


def frbs(
    series: FunctionalSeries,
    intervals: SeededIntervalSet | None = None,
    config: DetectorConfig | None = None,
    scanner: RidgeScanner | None = None,
) -> PreliminarySet:
    """Preliminary change points by seeded narrowest-over-threshold binary segmentation.

    Within an active window ``(s, e]``, among seeded intervals contained in
    it whose maximal statistic exceeds ``tau``, the shortest (then leftmost)
    one is chosen; its maximizer is recorded and the search recurses on
    both sides of it.
    """
    config = config or DetectorConfig()
    n = series.n
    if intervals is None:
        intervals = seeded_intervals(n, config.delta_for(n))
    stats = scan_all(series, intervals, config, scanner)
    pre = frbs_from_stats(stats, n, config.tau_for(n))
    log.debug("preliminary estimators %s", pre.estimators)
    return pre


def refined_interval(eta_hat: int, intervals: SeededIntervalSet) -> tuple[int, int]:
    """Union of the last-layer seeded intervals ``(s, e]`` containing ``eta_hat``.

    When fewer than two contain it, or ``eta_hat`` sits on the right end of
    the union, the union is widened by the nearest last-layer neighbour until
    ``s_k < eta_hat < e_k``.
    """
    n = intervals.n
    if not 0 < eta_hat < n:
        raise InvalidArgumentError(f"eta_hat={eta_hat} must lie in (0, {n})")
    last = sorted(intervals.last_layer)
    if not last:
        return 0, n
    chosen = [iv for iv in last if iv[0] < eta_hat <= iv[1]]
    if not chosen:
        mid = min(last, key=lambda iv: (abs((iv[0] + iv[1]) / 2 - eta_hat), iv[0]))
        chosen = [mid]
    s_k = min(iv[0] for iv in chosen)
    e_k = max(iv[1] for iv in chosen)
    rest = [iv for iv in last if iv not in chosen]
    while (len(chosen) < 2 or not s_k < eta_hat < e_k) and rest:
        if not s_k < eta_hat:
            pool = [iv for iv in rest if iv[0] < s_k]
        elif not eta_hat < e_k:
            pool = [iv for iv in rest if iv[1] > e_k]
        else:
            pool = rest
        if not pool:
            pool = rest
        nxt = min(pool, key=lambda iv: (abs((iv[0] + iv[1]) / 2 - eta_hat), iv[0]))
        chosen.append(nxt)
        rest.remove(nxt)
        s_k = min(s_k, nxt[0])
        e_k = max(e_k, nxt[1])
    if not s_k < eta_hat < e_k:
        s_k, e_k = min(s_k, eta_hat - 1), max(e_k, eta_hat + 1)
    return s_k, e_k


def _predictions(series: FunctionalSeries, fit: SegmentFit, s: int, e: int) -> np.ndarray:
    return (series.X[s:e] * series.grid.weights) @ fit.slope


def q_objective(
    series: FunctionalSeries, fit_left: SegmentFit, fit_right: SegmentFit, s_k: int, e_k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Local refinement objective at every ``t`` with ``s_k < t < e_k``.

    ``Q(t)`` sums squared residuals of the left fit over ``(s_k, t]`` and of
    the right fit over ``(t, e_k]``; computed with prefix sums.
    """
    y = series.y[s_k:e_k]
    r_left = (y - _predictions(series, fit_left, s_k, e_k)) ** 2
    r_right = (y - _predictions(series, fit_right, s_k, e_k)) ** 2
    c_left = np.cumsum(r_left)
    c_right = np.cumsum(r_right)
    ts = np.arange(s_k + 1, e_k)
    i = ts - s_k - 1
    return ts, c_left[i] + (c_right[-1] - c_right[i])


def refine(
    series: FunctionalSeries,
    eta_hat: int,
    s_k: int,
    e_k: int,
    config: DetectorConfig | None = None,
    k: int = 0,
    cache: FitCache | None = None,
) -> RefinedChangePoint:
    """Refine ``eta_hat`` by minimizing the two-fit residual objective on ``(s_k, e_k)``.

    Ties go to the candidate closest to ``eta_hat``, then to the smaller index.
    """
    config = config or DetectorConfig()
    if not 0 <= s_k < eta_hat < e_k <= series.n:
        raise InvalidArgumentError(f"need s_k < eta_hat < e_k, got ({s_k}, {eta_hat}, {e_k})")
    rule = config.lambda_rule
    fit_left = cached_fit(series, (s_k, eta_hat), rule, cache, config.kernel)
    fit_right = cached_fit(series, (eta_hat, e_k), rule, cache, config.kernel)
    if min(eta_hat - s_k, e_k - eta_hat) < config.min_fit_len:
        return RefinedChangePoint(k, s_k, e_k, eta_hat, eta_hat, fit_left, fit_right, True)
    ts, Q = q_objective(series, fit_left, fit_right, s_k, e_k)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(Q))))
    ties = ts[Q <= Q.min() + tol]
    eta_tilde = int(min(ties, key=lambda t: (abs(int(t) - eta_hat), int(t))))
    return RefinedChangePoint(k, s_k, e_k, eta_hat, eta_tilde, fit_left, fit_right, False)
