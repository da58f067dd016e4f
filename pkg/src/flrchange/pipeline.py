"""End-to-end run: tuning, preliminary detection, refinement and confidence intervals."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .detect import DetectorConfig, PreliminarySet, RefinedChangePoint, frbs, refine, refined_interval
from .errors import InsufficientDataError, InvalidArgumentError
from .evaluate import cross_validate
from .fgrid import FunctionalSeries
from .inference import (
    RNG_SCHEME,
    InferenceResult,
    confidence_interval,
    default_q,
    estimate_kappa_sq,
    lrv,
    sample_cov,
    simulate_argmin,
)
from .regress import FitCache
from .segment import seeded_intervals

__all__ = ["REPORT_SCHEMA", "ChangePointReport", "run_pipeline", "change_seed"]

REPORT_SCHEMA = "flrchange.report/1"

log = logging.getLogger(__name__)


def change_seed(seed: int, k: int) -> int:
    """Seed of the Monte-Carlo run for change ``k``, derived from the run seed."""
    return int(np.random.SeedSequence([int(seed), int(k)]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class ChangePointReport:
    n: int
    config: DetectorConfig
    preliminary: PreliminarySet
    refined: tuple[RefinedChangePoint, ...]
    inference: tuple[InferenceResult | None, ...]
    tuning: dict | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def preliminary_estimators(self) -> tuple[int, ...]:
        return self.preliminary.estimators

    @property
    def refined_estimators(self) -> tuple[int, ...]:
        return tuple(r.eta_tilde for r in self.refined)

    @property
    def intervals(self) -> tuple[tuple[float, float] | None, ...]:
        return tuple(None if inf is None else inf.interval for inf in self.inference)

    def to_dict(self) -> dict:
        changes = []
        for rc, inf in zip(self.refined, self.inference):
            entry = {
                "k": rc.k,
                "eta_hat": rc.eta_hat,
                "eta_tilde": rc.eta_tilde,
                "s_k": rc.s_k,
                "e_k": rc.e_k,
                "refinement_degraded": rc.degraded,
            }
            if inf is not None:
                entry.update(inf.to_dict())
            else:
                entry.update(kappa_sq=None, sigma_inf_sq=None, q=None, ci=None, alpha=self.config.alpha)
            changes.append(entry)
        config = self.config.to_dict(self.n)
        threads = config.pop("threads")
        return {
            "schema": REPORT_SCHEMA,
            "version": __version__,
            "seed": self.config.seed,
            "rng": RNG_SCHEME,
            "n": self.n,
            "config": config,
            "tuning": self.tuning,
            "preliminary": list(self.preliminary.estimators),
            "refined": sorted(self.refined_estimators),
            "changes": changes,
            "notes": list(self.notes),
            "runtime": {"threads": threads},
        }


def _infer_one(series, rc, refined_etas, q, config, cache) -> InferenceResult | str:
    cov = sample_cov(series, (rc.s_k, rc.e_k))
    kappa_sq = estimate_kappa_sq(rc.fit_left, rc.fit_right, cov)
    if not kappa_sq > 0:
        return f"change {rc.k}: estimated jump size is zero, no interval"
    try:
        sigma_sq = lrv(
            series,
            math.sqrt(kappa_sq),
            rc.fit_left,
            rc.fit_right,
            refined_etas,
            q,
            config.lambda_rule,
            cache,
            config.kernel,
        )
    except InsufficientDataError as exc:
        return f"change {rc.k}: {exc}"
    samples = simulate_argmin(
        math.sqrt(sigma_sq), series.n, config.B, change_seed(config.seed, rc.k), threads=config.threads
    )
    degenerate = bool(np.all(samples == samples[0]))
    interval = confidence_interval(rc.eta_tilde, kappa_sq, samples, config.alpha)
    return InferenceResult(
        k=rc.k,
        eta_tilde=rc.eta_tilde,
        kappa_sq_hat=kappa_sq,
        sigma_inf_sq_hat=sigma_sq,
        q=q,
        alpha=config.alpha,
        argmin_samples=samples,
        interval=(float(interval[0]), float(interval[1])),
        degenerate=degenerate,
    )


def run_pipeline(
    series: FunctionalSeries,
    config: DetectorConfig | None = None,
    tune: bool = True,
    lambda_grid=None,
    tau_grid=None,
    infer: bool = True,
) -> ChangePointReport:
    """Detect, refine and (optionally) build confidence intervals for change points.

    With ``tune=True`` the penalty and threshold are chosen by odd/even
    cross-validation over the grids (defaults: ``{0.1..0.5}`` and
    ``{1..3} * n**0.4``); pass a one-element grid to pin either value.
    """
    config = config or DetectorConfig()
    n = series.n
    if n < 2 * config.min_fit_len:
        raise InvalidArgumentError(f"series of length {n} is shorter than 2*min_fit_len")
    tuning = None
    if tune:
        lam, tau, table = cross_validate(series, lambda_grid, tau_grid, config)
        config = replace(config, lambda_rule=replace(config.lambda_rule, value=lam), tau=tau)
        tuning = {
            "lambda": lam,
            "tau": tau,
            "lambda_grid": sorted(lambda_grid) if lambda_grid is not None else None,
            "tau_grid": sorted(tau_grid) if tau_grid is not None else None,
            "loss_table": [[None if not np.isfinite(v) else float(v) for v in row] for row in table],
        }
    intervals = seeded_intervals(n, config.delta_for(n))
    pre = frbs(series, intervals, config)
    cache = FitCache(config.cache_capacity)
    refined = []
    for k, eta_hat in enumerate(pre.estimators, start=1):
        s_k, e_k = refined_interval(eta_hat, intervals)
        refined.append(refine(series, eta_hat, s_k, e_k, config, k=k, cache=cache))
    notes = [f"change {r.k}: half-segment shorter than min_fit_len, kept preliminary" for r in refined if r.degraded]
    inference: list[InferenceResult | None] = [None] * len(refined)
    if infer and refined:
        q = config.q if config.q is not None else max(2, default_q([(r.s_k, r.e_k) for r in refined]))
        etas = [r.eta_tilde for r in refined]
        for i, rc in enumerate(refined):
            out = _infer_one(series, rc, etas, q, config, cache)
            if isinstance(out, str):
                notes.append(out)
            else:
                inference[i] = out
    return ChangePointReport(
        n=n,
        config=config,
        preliminary=pre,
        refined=tuple(refined),
        inference=tuple(inference),
        tuning=tuning,
        notes=tuple(notes),
    )
