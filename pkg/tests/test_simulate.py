import numpy as np
import pytest

from flrchange.errors import InvalidArgumentError
from flrchange.fgrid import inner_l2, make_grid
from flrchange.simulate import (
    ScenarioSpec,
    eigenfunction,
    generate,
    kappa_sq_series,
    scenario_presets,
    slope_coefficients,
)


def test_kappa_closed_form():
    assert kappa_sq_series(1.0) == pytest.approx(1.0741442056807984, abs=1e-10)
    assert kappa_sq_series(0.5) == pytest.approx(0.36419973036108305, abs=1e-10)
    m = np.arange(1, 51)
    b0, b1 = slope_coefficients(1.0)
    direct = sum((1 / k**2) * (4 / k**4 - 3 / k**2) ** 2 for k in m)
    assert kappa_sq_series(1.0) == pytest.approx(direct, abs=1e-12)
    assert b0[0] == 4.0 and b1[1] == pytest.approx(-0.75)


def test_eigenfunctions_nearly_orthonormal():
    g = make_grid(200)
    Phi = np.array([eigenfunction(m, g) for m in range(1, 11)])
    G = np.array([[inner_l2(a, b, g) for b in Phi] for a in Phi])
    assert np.allclose(G, np.eye(10), atol=1.5e-2)
    assert np.array_equal(eigenfunction(1, g), np.ones(200))
    with pytest.raises(InvalidArgumentError):
        eigenfunction(0, g)


def test_shapes_and_truth():
    series, truth = generate(scenario_presets("S2", 160, c_beta=0.5, seed=4, p=30))
    assert series.y.shape == (160,) and series.X.shape == (160, 30)
    assert truth.change_points == (40, 100)
    assert len(truth.slope_segments) == 3
    assert np.array_equal(truth.slope_segments[0], truth.slope_segments[2])
    assert np.array_equal(truth.slope_at(40), truth.beta0)
    assert np.array_equal(truth.slope_at(41), truth.beta1)
    assert np.array_equal(truth.slope_at(101), truth.beta0)
    assert truth.kappa_sq_true == pytest.approx((0.36419973036108305,) * 2, abs=1e-10)


def test_deterministic_by_seed():
    a, _ = generate(ScenarioSpec(n=50, p=20, change_points=(25,), seed=3))
    b, _ = generate(ScenarioSpec(n=50, p=20, change_points=(25,), seed=3))
    c, _ = generate(ScenarioSpec(n=50, p=20, change_points=(25,), seed=4))
    assert np.array_equal(a.y, b.y) and np.array_equal(a.X, b.X)
    assert not np.array_equal(a.y, c.y)


def test_noise_is_standard_normal():
    series, truth = generate(ScenarioSpec(n=4000, p=50, change_points=(2000,), seed=1))
    w = series.grid.weights
    signal = np.array([(series.X[j] * w) @ truth.slope_at(j + 1) for j in range(series.n)])
    eps = series.y - signal
    assert eps.mean() == pytest.approx(0.0, abs=0.06)
    assert eps.var() == pytest.approx(1.0, rel=0.08)


def test_scores_are_stationary_ar1():
    # the constant eigenfunction isolates the first score (weight 1)
    g = make_grid(200)
    series, _ = generate(ScenarioSpec(n=20000, p=200, ar_coeff=0.3, seed=2))
    phi1 = eigenfunction(1, g)
    z1 = (series.X * g.weights) @ phi1
    # cosines integrate to ~0 on the grid, so z1 is the first score
    assert z1.var() == pytest.approx(1.0, rel=0.05)
    r1 = np.corrcoef(z1[:-1], z1[1:])[0, 1]
    assert r1 == pytest.approx(0.3, abs=0.03)


@pytest.mark.parametrize(
    "kw",
    [dict(n=10, change_points=(0,)), dict(n=10, change_points=(5, 3)), dict(n=10, ar_coeff=1.0), dict(n=1)],
)
def test_bad_specs(kw):
    with pytest.raises(InvalidArgumentError):
        ScenarioSpec(**kw)


def test_presets():
    assert scenario_presets("S1", 400).change_points == (200,)
    assert scenario_presets("S2", 800).change_points == (200, 500)
    with pytest.raises(InvalidArgumentError):
        scenario_presets("S3", 100)
