"""Command-line interface.

Subcommands::

    flrchange simulate    write a synthetic dataset plus a truth sidecar
    flrchange detect      tune, detect, refine and build confidence intervals
    flrchange prep-sp500  turn a daily price file into a functional dataset
    flrchange evaluate    score a report against a truth sidecar
    flrchange curve       emit the scan statistic (t, W_t) on one interval

Exit codes: 0 success, 1 pipeline failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .detect import DetectorConfig
from .errors import InvalidArgumentError
from .evaluate import evaluate_run
from .fgrid import FunctionalSeries, make_grid
from .pipeline import run_pipeline
from .regress import LambdaRule, RidgeScanner
from .segment import w_curve
from .simulate import generate, scenario_presets

log = logging.getLogger("flrchange")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Malformed user input; maps to exit code 2."""


def _fmt(v: float) -> str:
    return "%.17g" % v


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    # write next to the target and rename, so a failure never leaves a partial file
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dataset_text(y: np.ndarray, X: np.ndarray) -> str:
    p = X.shape[1]
    lines = [",".join(["y", *(f"x_{k}" for k in range(p))])]
    for yj, row in zip(y, X):
        lines.append(",".join([_fmt(yj), *map(_fmt, row)]))
    return "\n".join(lines) + "\n"


def read_dataset(path: str | os.PathLike) -> FunctionalSeries:
    """Read a ``y,x_0,...,x_{p-1}`` CSV file into a series on an even grid."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        header = [h.strip() for h in header]
        p = len(header) - 1
        if p < 2 or header[0] != "y" or header[1:] != [f"x_{k}" for k in range(p)]:
            raise InputError(f"{path}: header must be y,x_0,...,x_(p-1) with p >= 2")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != p + 1:
                raise InputError(f"{path}:{lineno}: expected {p + 1} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.asarray(rows)
    return FunctionalSeries(data[:, 0], data[:, 1:], make_grid(p))


def read_json(path: str | os.PathLike) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read JSON from {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a JSON object")
    return doc


def sp500_features(prices: np.ndarray, lags: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Daily log-returns and lagged log-price curves.

    For 1-based day ``j > lags + 1``: ``y_j = 100 log(P_j / P_{j-1})`` and
    ``X_j(k) = 100 log(P_{j-k} / P_{j-lags-1})`` for ``k = 1..lags``.
    """
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 1 or prices.size < lags + 2:
        raise InputError(f"need at least {lags + 2} prices, got {prices.size}")
    if not np.all(prices > 0):
        bad = int(np.argmax(~(prices > 0))) + 1
        raise InputError(f"price on row {bad} is not positive")
    logp = np.log(prices)
    T = prices.size
    j = np.arange(lags + 1, T)  # 0-based positions of days lags+2..T
    y = 100.0 * (logp[j] - logp[j - 1])
    k = np.arange(1, lags + 1)
    X = 100.0 * (logp[j[:, None] - k[None, :]] - logp[j - lags - 1][:, None])
    return y, X


def read_prices(path: str | os.PathLike, column: str = "price") -> np.ndarray:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in [f.strip() for f in reader.fieldnames]:
            raise InputError(f"{path}: no '{column}' column")
        key = next(f for f in reader.fieldnames if f.strip() == column)
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(float(row[key]))
            except (TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: bad price {row[key]!r}") from exc
    return np.asarray(out)


def _config_from_args(args) -> DetectorConfig:
    if args.omega is not None:
        rule = LambdaRule.omega(args.omega, args.r)
    else:
        rule = LambdaRule.constant(args.lam if args.lam is not None else 0.2)
    return DetectorConfig(
        lambda_rule=rule,
        tau=args.tau,
        delta=args.delta,
        margin=args.margin,
        min_fit_len=args.min_fit_len,
        q=args.q,
        B=args.B,
        alpha=args.alpha,
        seed=args.seed,
        threads=args.threads,
    )


def cmd_simulate(args) -> int:
    spec = scenario_presets(args.scenario, args.n, c_beta=args.cbeta, seed=args.seed, p=args.p)
    series, truth = generate(spec)
    out = Path(args.out)
    truth_path = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    doc = truth.to_dict(spec)
    doc["scenario"] = args.scenario
    _atomic_write(out, dataset_text(series.y, series.X))
    _atomic_write(truth_path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s (%d rows) and %s", out, series.n, truth_path)
    return EXIT_OK


def cmd_detect(args) -> int:
    series = read_dataset(args.input)
    try:
        config = _config_from_args(args)
    except InvalidArgumentError as exc:
        raise InputError(str(exc)) from exc
    pinned_lam = args.lam is not None or args.omega is not None
    tune = not (pinned_lam and args.tau is not None)
    lam_grid = [config.lambda_rule.value] if pinned_lam else None
    tau_grid = [args.tau] if args.tau is not None else None
    report = run_pipeline(series, config, tune=tune, lambda_grid=lam_grid, tau_grid=tau_grid)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    for rc, inf in zip(report.refined, report.inference):
        ci = "n/a" if inf is None else f"[{inf.interval[0]:.1f}, {inf.interval[1]:.1f}]"
        log.info("change %d: preliminary %d, refined %d, CI %s", rc.k, rc.eta_hat, rc.eta_tilde, ci)
    return EXIT_OK


def cmd_prep_sp500(args) -> int:
    prices = read_prices(args.input, args.column)
    y, X = sp500_features(prices, args.lags)
    _atomic_write(args.out, dataset_text(y, X))
    log.info("wrote %s (%d rows)", args.out, y.size)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = read_json(args.report)
    truth = read_json(args.truth)
    try:
        n = int(report["n"])
        refined = [int(v) for v in report["refined"]]
        preliminary = [int(v) for v in report["preliminary"]]
        changes = sorted(report["changes"], key=lambda c: c["eta_tilde"])
        intervals = [None if c.get("ci") is None else tuple(c["ci"]) for c in changes]
        truths = [int(v) for v in truth["change_points"]]
        n_truth = int(truth["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"report or truth file is missing fields: {exc}") from exc
    if n != n_truth:
        raise InputError(f"report is for n={n} but truth is for n={n_truth}")
    ev = evaluate_run(refined, truths, n, preliminary, intervals)
    doc = ev.to_dict()
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    rows = [
        ("K_hat / K", f"{ev.k_hat} / {ev.k_true}"),
        ("d_H pre", "n/a" if ev.hausdorff_pre is None else f"{ev.hausdorff_pre:.4f}"),
        ("d_H fin", f"{ev.hausdorff_scaled:.4f}"),
        ("covered", " ".join(map(str, ev.covered)) or "n/a"),
        ("widths", " ".join(f"{w:.1f}" for w in ev.widths) or "n/a"),
    ]
    for name, val in rows:
        print(f"{name:<10} {val}", file=sys.stderr)
    return EXIT_OK


def cmd_curve(args) -> int:
    series = read_dataset(args.input)
    s = args.s
    e = args.e if args.e is not None else series.n
    if not 0 <= s < e <= series.n:
        raise InputError(f"need 0 <= s < e <= n={series.n}, got s={s}, e={e}")
    scanner = RidgeScanner(series, LambdaRule.constant(args.lam))
    ts, values = w_curve(scanner, s, e, args.margin)
    lines = ["t,W"] + [f"{t},{_fmt(v)}" for t, v in zip(ts, values)]
    text = "\n".join(lines) + "\n"
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="flrchange",
        description="Change points in scalar-on-function regression: detection and confidence intervals.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="write a synthetic dataset and its truth sidecar")
    sp.add_argument("--scenario", choices=["S1", "S2"], default="S1")
    sp.add_argument("--n", type=int, default=400)
    sp.add_argument("--p", type=int, default=200, help="grid size (default: 200)")
    sp.add_argument("--cbeta", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="dataset CSV path")
    sp.add_argument("--truth", help="truth JSON path (default: <out>.truth.json)")
    sp.set_defaults(func=cmd_simulate)

    dp = sub.add_parser("detect", help="run the full pipeline on a dataset")
    dp.add_argument("input", help="dataset CSV (y,x_0,...,x_{p-1})")
    dp.add_argument("--lambda", dest="lam", type=float, help="fixed penalty (skips tuning it)")
    dp.add_argument("--omega", type=float, help="use lambda_m = omega * m^(-2r/(2r+1))")
    dp.add_argument("--r", type=float, default=1.0, help="regularity in the omega rule (default: 1)")
    dp.add_argument("--tau", type=float, help="fixed threshold (skips tuning it)")
    dp.add_argument("--delta", type=int, help="seeding spacing (default: n // 10)")
    dp.add_argument("--margin", type=int, default=10)
    dp.add_argument("--min-fit-len", dest="min_fit_len", type=int, default=10)
    dp.add_argument("--alpha", type=float, default=0.05)
    dp.add_argument("--B", type=int, default=2000, help="Monte-Carlo replicates (default: 2000)")
    dp.add_argument("--q", type=int, help="block half-width for the long-run variance")
    dp.add_argument("--seed", type=int, default=0)
    dp.add_argument("--threads", type=int, default=1)
    dp.add_argument("--out", help="report JSON path (default: stdout)")
    dp.set_defaults(func=cmd_detect)

    pp = sub.add_parser("prep-sp500", help="build a dataset from daily prices")
    pp.add_argument("input", help="CSV with a price column")
    pp.add_argument("--column", default="price")
    pp.add_argument("--lags", type=int, default=20)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_prep_sp500)

    ep = sub.add_parser("evaluate", help="score a report against the truth")
    ep.add_argument("--report", required=True)
    ep.add_argument("--truth", required=True)
    ep.add_argument("--out", help="metrics JSON path (default: stdout)")
    ep.set_defaults(func=cmd_evaluate)

    cp = sub.add_parser("curve", help="emit (t, W_t) for one interval as CSV")
    cp.add_argument("input")
    cp.add_argument("--s", type=int, default=0)
    cp.add_argument("--e", type=int, help="right end (default: n)")
    cp.add_argument("--lambda", dest="lam", type=float, default=0.2)
    cp.add_argument("--margin", type=int, default=10)
    cp.add_argument("--out")
    cp.set_defaults(func=cmd_curve)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT if args.command in ("simulate", "prep-sp500") else EXIT_FAIL
    except Exception as exc:  # noqa: BLE001 - any pipeline failure becomes exit 1
        log.debug("pipeline failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
