"""Localization and coverage metrics, and odd/even cross-validation of (lambda, tau)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .detect import DetectorConfig, frbs_from_stats, scan_all
from .errors import InvalidArgumentError, TuningFailedError
from .fgrid import FunctionalSeries
from .regress import FitCache, LambdaRule, cached_fit
from .segment import seeded_intervals

__all__ = [
    "EvalReport",
    "hausdorff",
    "coverage",
    "evaluate_run",
    "default_lambda_grid",
    "default_tau_grid",
    "cross_validate",
    "detection_summary",
]

log = logging.getLogger(__name__)


def hausdorff(estimates: Sequence[int], truths: Sequence[int], n: int) -> float:
    """Scaled Hausdorff distance between estimated and true change points.

    Estimates are padded with ``1`` and ``n + 1``, truths with ``0`` and ``n``,
    so a perfect estimate scores ``1/n`` rather than 0.
    """
    if n < 1:
        raise InvalidArgumentError("n must be positive")
    est = np.array([1, *estimates, n + 1], dtype=float)
    tru = np.array([0, *truths, n], dtype=float)
    d = np.abs(est[:, None] - tru[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()) / n)


def coverage(interval: tuple[float, float], eta_true: float) -> bool:
    lo, hi = interval
    if lo > hi:
        raise InvalidArgumentError(f"interval ({lo}, {hi}) has lo > hi")
    return bool(lo <= eta_true <= hi)


@dataclass(frozen=True)
class EvalReport:
    k_hat: int
    k_true: int
    under: bool
    over: bool
    hausdorff_scaled: float
    hausdorff_pre: float | None = None
    covered: tuple[bool, ...] = ()
    widths: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "k_true": self.k_true,
            "under": self.under,
            "over": self.over,
            "hausdorff_fin": self.hausdorff_scaled,
            "hausdorff_pre": self.hausdorff_pre,
            "covered": list(self.covered),
            "widths": list(self.widths),
        }


def evaluate_run(
    refined: Sequence[int],
    truths: Sequence[int],
    n: int,
    preliminary: Sequence[int] | None = None,
    intervals: Sequence[tuple[float, float] | None] | None = None,
) -> EvalReport:
    """Metrics for one run. Coverage is only scored when the change count is right."""
    k_hat, k_true = len(refined), len(truths)
    covered: tuple[bool, ...] = ()
    widths: tuple[float, ...] = ()
    if intervals is not None and k_hat == k_true:
        pairs = [(iv, t) for iv, t in zip(intervals, truths) if iv is not None]
        covered = tuple(coverage(iv, t) for iv, t in pairs)
        widths = tuple(float(iv[1] - iv[0]) for iv, _ in pairs)
    return EvalReport(
        k_hat=k_hat,
        k_true=k_true,
        under=k_hat < k_true,
        over=k_hat > k_true,
        hausdorff_scaled=hausdorff(sorted(refined), truths, n),
        hausdorff_pre=None if preliminary is None else hausdorff(sorted(preliminary), truths, n),
        covered=covered,
        widths=widths,
    )


def _mean_std(values) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0


def detection_summary(reports: Sequence[EvalReport]) -> dict:
    """Aggregate over repetitions.

    Coverage and width are averaged over the changes of runs with
    ``k_hat == k_true`` only. Standard deviations use ``ddof=1``.
    """
    if not reports:
        raise InvalidArgumentError("need at least one report")
    exact = [r for r in reports if r.k_hat == r.k_true]
    fin_mean, fin_sd = _mean_std([r.hausdorff_scaled for r in reports])
    pres = [r.hausdorff_pre for r in reports if r.hausdorff_pre is not None]
    pre_mean, pre_sd = _mean_std(pres)
    cov = [c for r in exact for c in r.covered]
    width_mean, width_sd = _mean_std([w for r in exact for w in r.widths])
    return {
        "reps": len(reports),
        "under": sum(r.under for r in reports) / len(reports),
        "over": sum(r.over for r in reports) / len(reports),
        "hausdorff_pre_mean": pre_mean,
        "hausdorff_pre_sd": pre_sd,
        "hausdorff_fin_mean": fin_mean,
        "hausdorff_fin_sd": fin_sd,
        "exact_reps": len(exact),
        "coverage": float(np.mean(cov)) if cov else None,
        "width_mean": width_mean,
        "width_sd": width_sd,
    }


def default_lambda_grid() -> tuple[float, ...]:
    return (0.1, 0.2, 0.3, 0.4, 0.5)


def default_tau_grid(n: int) -> tuple[float, ...]:
    return tuple(c * n**0.4 for c in (1.0, 1.5, 2.0, 2.5, 3.0))


def _validation_loss(
    train: FunctionalSeries,
    test: FunctionalSeries,
    estimators: Sequence[int],
    rule: LambdaRule,
    cache: FitCache,
    kernel,
) -> float:
    bounds = [0, *estimators, train.n]
    loss = 0.0
    for s, e in zip(bounds[:-1], bounds[1:]):
        fit = cached_fit(train, (s, e), rule, cache, kernel)
        # test index i (1-based) belongs with training index i
        lo, hi = s, min(e, test.n)
        if hi <= lo:
            continue
        pred = (test.X[lo:hi] * test.grid.weights) @ fit.slope
        r = test.y[lo:hi] - pred
        loss += float(r @ r)
    return loss


def cross_validate(
    series: FunctionalSeries,
    lambda_grid: Sequence[float] | None = None,
    tau_grid: Sequence[float] | None = None,
    config: DetectorConfig | None = None,
) -> tuple[float, float, np.ndarray]:
    """Pick ``(lambda, tau)`` by odd/even split validation.

    Odd time indices train, even ones test. For every grid pair the detector
    runs on the training half (seeding spacing and scan margins halved); a slope is fitted between consecutive detected
    changes, and the squared prediction error on the test half is the loss.
    ``lambda_grid`` values replace ``config.lambda_rule.value`` (a constant
    penalty, or ``omega`` in omega mode). Ties prefer the smaller ``lambda``,
    then the smaller ``tau``.

    Returns ``(lambda_star, tau_star, loss_table)``; ``loss_table[i, j]`` is
    the loss of the ``i``-th smallest ``lambda`` and ``j``-th smallest ``tau``,
    or NaN if that pair failed.
    """
    config = config or DetectorConfig()
    n = series.n
    lambda_grid = sorted(lambda_grid if lambda_grid is not None else default_lambda_grid())
    tau_grid = sorted(tau_grid if tau_grid is not None else default_tau_grid(n))
    if not lambda_grid or not tau_grid:
        raise InvalidArgumentError("tuning grids must be nonempty")
    if n < 2 * config.min_fit_len:
        raise InvalidArgumentError(f"series of length {n} is too short to split for validation")
    idx = np.arange(n)
    train = series.subset(idx[0::2])
    test = series.subset(idx[1::2])
    if config.delta is None:
        delta = max(1, train.n // 10)
    else:
        delta = max(1, config.delta // 2)
    intervals = seeded_intervals(train.n, delta)
    # the training half is half as long, so spacing constraints shrink with it
    half = replace(
        config,
        margin=max(1, config.margin // 2),
        min_fit_len=max(1, config.min_fit_len // 2),
    )
    table = np.full((len(lambda_grid), len(tau_grid)), np.nan)
    failures: dict[str, str] = {}
    for i, lam in enumerate(lambda_grid):
        rule = replace(config.lambda_rule, value=float(lam))
        cfg = replace(half, lambda_rule=rule)
        cache = FitCache(config.cache_capacity)
        try:
            stats = scan_all(train, intervals, cfg)
        except Exception as exc:  # noqa: BLE001 - every failure is recorded for diagnostics
            failures[f"lambda={lam}"] = repr(exc)
            continue
        for j, tau in enumerate(tau_grid):
            try:
                pre = frbs_from_stats(stats, train.n, tau)
                table[i, j] = _validation_loss(train, test, pre.estimators, rule, cache, config.kernel)
            except Exception as exc:  # noqa: BLE001
                failures[f"lambda={lam},tau={tau}"] = repr(exc)
    ok = np.isfinite(table)
    if not ok.any():
        raise TuningFailedError("every (lambda, tau) configuration failed", failures)
    best = None
    for i in range(len(lambda_grid)):
        for j in range(len(tau_grid)):
            if ok[i, j] and (best is None or table[i, j] < table[best]):
                best = (i, j)
    log.debug("cross-validation picked lambda=%s tau=%s", lambda_grid[best[0]], tau_grid[best[1]])
    return float(lambda_grid[best[0]]), float(tau_grid[best[1]]), table
