import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flrchange.errors import InvalidArgumentError, SingularSystemError
from flrchange.fgrid import FunctionalSeries
from flrchange.kernel import gram, sobolev_kernel
from flrchange.regress import (
    FitCache,
    LambdaRule,
    RidgeScanner,
    cached_fit,
    fit_slope,
    predict,
    segment_rss,
)

K = sobolev_kernel()


def objective(M, y, c, lam):
    m = len(y)
    r = y - M @ c
    return r @ r / m + lam * (c @ M @ c)


def test_normal_equations(s1_200):
    series, _ = s1_200
    seg = (20, 120)
    fit = fit_slope(series, seg, 0.2)
    M = gram(K, series, seg).entries
    y = series.y[20:120]
    lhs = (M + 100 * 0.2 * np.eye(100)) @ fit.coeffs
    assert np.max(np.abs(lhs - y)) <= 1e-8 * max(1.0, np.max(np.abs(y)))
    assert fit.m == 100 and fit.lam == 0.2
    assert fit.rss == pytest.approx(float(np.sum((y - M @ fit.coeffs) ** 2)), rel=1e-12)
    assert fit.penalty == pytest.approx(float(fit.coeffs @ M @ fit.coeffs), rel=1e-10)


def test_slope_reproduces_fitted_values(s1_200):
    series, _ = s1_200
    fit = fit_slope(series, (0, 60), 0.3)
    pred = predict(fit, series.X[0:60])
    assert np.allclose(pred, fit.fitted, rtol=1e-9, atol=1e-10)
    assert predict(fit, series.X[3]) == pytest.approx(fit.fitted[3], rel=1e-9, abs=1e-10)


def test_fit_is_a_minimizer(small_series):
    fit = fit_slope(small_series, (0, 50), 0.1)
    M = gram(K, small_series, (0, 50)).entries
    y = small_series.y[:50]
    best = objective(M, y, fit.coeffs, 0.1)
    assert best == pytest.approx(fit.objective, rel=1e-10)
    rng = np.random.default_rng(5)
    for _ in range(20):
        d = rng.standard_normal(50) * 1e-3
        assert objective(M, y, fit.coeffs + d, 0.1) >= best - 1e-12


def test_heavy_penalty_shrinks_to_zero(s1_200):
    series, _ = s1_200
    fit = fit_slope(series, (0, 100), 1e8)
    y = series.y[:100]
    assert np.max(np.abs(fit.slope)) < 1e-6
    assert fit.rss == pytest.approx(float(y @ y), rel=1e-6)


def test_rss_increases_with_penalty(s1_200):
    series, _ = s1_200
    rss = [fit_slope(series, (50, 150), lam).rss for lam in (1e-3, 0.01, 0.1, 0.2, 0.5, 1.0, 10.0)]
    assert all(a <= b + 1e-12 for a, b in zip(rss, rss[1:]))


def test_unpenalized_rank_deficient(s1_200):
    # simulated curves span 50 directions, so 60 of them give a singular Gram matrix
    series, _ = s1_200
    with pytest.raises(SingularSystemError) as info:
        fit_slope(series, (0, 60), 0.0)
    assert info.value.condition > 1e10
    with pytest.warns(RuntimeWarning):
        fit = fit_slope(series, (0, 60), 0.0, pseudo_inverse=True)
    assert fit.pseudo_inverse
    assert np.all(np.isfinite(fit.slope))


def test_unpenalized_full_rank(small_series):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit = fit_slope(small_series, (0, 20), 0.0)
    assert fit.rss == pytest.approx(0.0, abs=1e-12)
    assert not fit.pseudo_inverse


@pytest.mark.parametrize("bad", [-0.1, np.inf, np.nan])
def test_bad_penalty(small_series, bad):
    with pytest.raises(InvalidArgumentError):
        fit_slope(small_series, (0, 10), bad)


def test_bad_segment_and_foreign_gram(small_series):
    with pytest.raises(InvalidArgumentError):
        fit_slope(small_series, (10, 10), 0.1)
    with pytest.raises(InvalidArgumentError):
        fit_slope(small_series, (0, 10), 0.1, gram_matrix=gram(K, small_series, (0, 11)))


def test_lambda_rules():
    assert LambdaRule.constant(0.3)(17) == 0.3
    rule = LambdaRule.omega(2.0, r=1.0)
    assert rule(8) == pytest.approx(2.0 * 8 ** (-2 / 3))
    assert rule.to_dict() == {"kind": "omega", "value": 2.0, "r": 1.0}
    with pytest.raises(InvalidArgumentError):
        LambdaRule("weird", 1.0)
    with pytest.raises(InvalidArgumentError):
        LambdaRule.constant(-1.0)


def test_cache_hits_and_eviction(small_series):
    cache = FitCache(capacity=2)
    rule = LambdaRule.constant(0.2)
    a = cached_fit(small_series, (0, 20), rule, cache)
    assert cached_fit(small_series, (0, 20), rule, cache) is a
    assert cache.hits == 1 and cache.misses == 1
    cached_fit(small_series, (0, 30), rule, cache)
    cached_fit(small_series, (0, 40), rule, cache)
    assert len(cache) == 2
    assert cached_fit(small_series, (0, 20), rule, cache) is not a


# The scanner works in a compressed feature space; the representer solve is the
# reference route and the two must agree.


@pytest.mark.parametrize("rule", [LambdaRule.constant(0.2), LambdaRule.omega(0.5)])
def test_scanner_matches_representer(s1_200, rule):
    series, _ = s1_200
    sc = RidgeScanner(series, rule)
    assert sc.rank == 50
    for s, e in [(0, 200), (13, 77), (100, 131)]:
        ref = segment_rss(series, (s, e), rule)
        assert sc.rss(s, e) == pytest.approx(ref, rel=1e-8)
    ts = np.array([25, 11, 60, 99, 140, 12, 180])
    left, right = sc.split_rss(0, 200, ts)
    for t, lv, rv in zip(ts, left, right):
        assert lv == pytest.approx(segment_rss(series, (0, int(t)), rule), rel=1e-8)
        assert rv == pytest.approx(segment_rss(series, (int(t), 200), rule), rel=1e-8)


def test_scanner_split_on_dense_design(small_series):
    rule = LambdaRule.constant(0.1)
    sc = RidgeScanner(small_series, rule)
    ts = np.arange(6, 75)
    left, right = sc.split_rss(5, 80, ts)
    for t in (6, 40, 74):
        i = t - 6
        assert left[i] == pytest.approx(segment_rss(small_series, (5, t), rule), rel=1e-8)
        assert right[i] == pytest.approx(segment_rss(small_series, (t, 80), rule), rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 60), st.integers(5, 19), st.floats(0.01, 2.0))
def test_scanner_property(s, m, lam):
    rng = np.random.default_rng(s * 31 + m)
    from flrchange.fgrid import make_grid

    g = make_grid(12)
    series = FunctionalSeries(rng.standard_normal(80), rng.standard_normal((80, 12)), g)
    rule = LambdaRule.constant(lam)
    e = s + m
    assert RidgeScanner(series, rule).rss(s, e) == pytest.approx(
        fit_slope(series, (s, e), lam).rss, rel=1e-8, abs=1e-10
    )
